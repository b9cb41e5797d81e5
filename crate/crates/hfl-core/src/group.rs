//! Finite matrix-group engine: breadth-first enumeration from generators,
//! subgroups, cosets, double cosets, conjugacy classes, stabilizers, and
//! certification of (virtual) Iwahori decompositions.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::GroupError;
use crate::zmod::ZmodMatrix;

/// Default ceiling on group enumeration.
pub const DEFAULT_ELEMENT_BUDGET: usize = 10_000_000;

/// A fully enumerated group of invertible matrices over Z/p^l.
///
/// Elements are stored in canonical breadth-first order: identity first, then
/// layer by layer, scanning parents in position order and generators in the
/// given order. Every element carries the `(parent, generator)` pair by which
/// it was first discovered, so module matrices can be evaluated lazily from
/// generator images alone.
pub struct FiniteGroup {
    pub n: usize,
    pub modulus: u32,
    elem_data: Vec<u8>,
    index: HashMap<u128, u32>,
    /// Positions of the generators in the element list.
    pub generator_positions: Vec<u32>,
    /// The generators as supplied.
    pub generators: Vec<ZmodMatrix>,
    /// `words[i] = Some((parent, gen))` with `elem[i] = elem[parent] * gens[gen]`.
    pub words: Vec<Option<(u32, u32)>>,
    inverses: Vec<u32>,
    /// Set when this group was constructed as a subgroup: (parent, positions
    /// of local elements inside the parent).
    pub parent: Option<(Arc<FiniteGroup>, Vec<u32>)>,
}

impl std::fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "FiniteGroup(order {}, n={}, mod {})",
            self.order(),
            self.n,
            self.modulus
        )
    }
}

impl FiniteGroup {
    /// Breadth-first closure of a generating set.
    ///
    /// The element order (and with it every transversal and class
    /// representative downstream) is fully determined by the generator list.
    pub fn generate_with_budget(
        generators: Vec<ZmodMatrix>,
        n: usize,
        modulus: u32,
        budget: usize,
    ) -> Result<Arc<FiniteGroup>, GroupError> {
        for g in &generators {
            if g.n != n || g.modulus != modulus {
                return Err(GroupError::MixedGenerators);
            }
            if !g.is_invertible() {
                return Err(GroupError::NotInvertible);
            }
        }
        let ident = ZmodMatrix::identity(n, modulus);
        let mut elem_data: Vec<u8> = Vec::new();
        let mut index: HashMap<u128, u32> = HashMap::new();
        let mut words: Vec<Option<(u32, u32)>> = Vec::new();
        let push = |m: &ZmodMatrix,
                        word: Option<(u32, u32)>,
                        elem_data: &mut Vec<u8>,
                        index: &mut HashMap<u128, u32>,
                        words: &mut Vec<Option<(u32, u32)>>|
         -> Option<u32> {
            let key = m.encode();
            if index.contains_key(&key) {
                return None;
            }
            let pos = words.len() as u32;
            index.insert(key, pos);
            elem_data.extend_from_slice(&m.entries);
            words.push(word);
            Some(pos)
        };
        push(&ident, None, &mut elem_data, &mut index, &mut words);
        let mut frontier = 0usize;
        while frontier < words.len() {
            let parent = Self::raw_elem(&elem_data, n, modulus, frontier);
            for (gi, g) in generators.iter().enumerate() {
                let prod = parent.mul(g);
                if push(
                    &prod,
                    Some((frontier as u32, gi as u32)),
                    &mut elem_data,
                    &mut index,
                    &mut words,
                )
                .is_some()
                    && words.len() > budget
                {
                    return Err(GroupError::BudgetExceeded { budget });
                }
            }
            frontier += 1;
        }
        let count = words.len();
        let mut group = FiniteGroup {
            n,
            modulus,
            elem_data,
            index,
            generator_positions: Vec::new(),
            generators,
            words,
            inverses: Vec::new(),
            parent: None,
        };
        group.generator_positions = group
            .generators
            .iter()
            .map(|g| group.index[&g.encode()])
            .collect();
        group.inverses = (0..count as u32)
            .map(|i| {
                let inv = group.elem(i as usize).inverse().expect("group element");
                group.index[&inv.encode()]
            })
            .collect();
        Ok(Arc::new(group))
    }

    pub fn generate(
        generators: Vec<ZmodMatrix>,
        n: usize,
        modulus: u32,
    ) -> Result<Arc<FiniteGroup>, GroupError> {
        Self::generate_with_budget(generators, n, modulus, DEFAULT_ELEMENT_BUDGET)
    }

    /// Rebuild a group from a stored element table (canonical breadth-first
    /// order). Words are re-derived by replaying the breadth-first discovery
    /// scan, which reproduces the builder's assignment exactly.
    pub fn from_element_table(
        n: usize,
        modulus: u32,
        generators: Vec<ZmodMatrix>,
        elements: Vec<ZmodMatrix>,
    ) -> Result<Arc<FiniteGroup>, GroupError> {
        if elements.is_empty() || !elements[0].is_identity() {
            return Err(GroupError::Cache("element table must start with identity".into()));
        }
        let mut elem_data = Vec::with_capacity(elements.len() * n * n);
        let mut index = HashMap::new();
        for (i, e) in elements.iter().enumerate() {
            if e.n != n || e.modulus != modulus {
                return Err(GroupError::MixedGenerators);
            }
            elem_data.extend_from_slice(&e.entries);
            if index.insert(e.encode(), i as u32).is_some() {
                return Err(GroupError::Cache("duplicate element in table".into()));
            }
        }
        let count = elements.len();
        let mut words: Vec<Option<(u32, u32)>> = vec![None; count];
        for parent in 0..count as u32 {
            for (gi, g) in generators.iter().enumerate() {
                let prod = elements[parent as usize].mul(g);
                let pos = *index
                    .get(&prod.encode())
                    .ok_or_else(|| GroupError::Cache("table not closed under product".into()))?;
                if pos != 0 && words[pos as usize].is_none() && pos > parent {
                    words[pos as usize] = Some((parent, gi as u32));
                }
            }
        }
        if words.iter().skip(1).any(Option::is_none) {
            return Err(GroupError::Cache("element table is not in generation order".into()));
        }
        let mut group = FiniteGroup {
            n,
            modulus,
            elem_data,
            index,
            generator_positions: Vec::new(),
            generators,
            words,
            inverses: Vec::new(),
            parent: None,
        };
        group.generator_positions = group
            .generators
            .iter()
            .map(|g| group.index[&g.encode()])
            .collect();
        group.inverses = (0..count as u32)
            .map(|i| {
                let inv = group.elem(i as usize).inverse().expect("group element");
                group.index[&inv.encode()]
            })
            .collect();
        Ok(Arc::new(group))
    }

    fn raw_elem(data: &[u8], n: usize, modulus: u32, i: usize) -> ZmodMatrix {
        let sz = n * n;
        ZmodMatrix {
            n,
            modulus,
            entries: data[i * sz..(i + 1) * sz].to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.words.len()
    }

    pub fn elem(&self, i: usize) -> ZmodMatrix {
        Self::raw_elem(&self.elem_data, self.n, self.modulus, i)
    }

    pub fn position_of(&self, m: &ZmodMatrix) -> Option<u32> {
        self.index.get(&m.encode()).copied()
    }

    pub fn contains(&self, m: &ZmodMatrix) -> bool {
        self.position_of(m).is_some()
    }

    #[inline]
    pub fn inv(&self, i: u32) -> u32 {
        self.inverses[i as usize]
    }

    pub fn mul(&self, i: u32, j: u32) -> u32 {
        let prod = self.elem(i as usize).mul(&self.elem(j as usize));
        self.index[&prod.encode()]
    }

    pub fn conj(&self, g: u32, x: u32) -> u32 {
        // g x g^{-1}
        self.mul(self.mul(g, x), self.inv(g))
    }

    pub fn identity_pos(&self) -> u32 {
        0
    }

    /// All element positions, i.e. `0..order`.
    pub fn all_positions(&self) -> impl Iterator<Item = u32> + '_ {
        0..self.order() as u32
    }

    /// Subgroup generated by a set of member matrices. The result references
    /// `self` as parent; local element order is the subgroup's own canonical
    /// breadth-first order.
    pub fn subgroup_from_generators(
        self: &Arc<Self>,
        gens: &[ZmodMatrix],
    ) -> Result<Arc<FiniteGroup>, GroupError> {
        for g in gens {
            if !self.contains(g) {
                return Err(GroupError::NotAMember);
            }
        }
        let sub = FiniteGroup::generate_with_budget(
            gens.to_vec(),
            self.n,
            self.modulus,
            self.order(),
        )?;
        Ok(self.adopt(sub))
    }

    /// Subgroup of all elements satisfying `pred`, closed under product and
    /// inverse (closure is computed, not assumed). The identity is always
    /// included.
    pub fn subgroup_where(
        self: &Arc<Self>,
        pred: impl Fn(&ZmodMatrix) -> bool,
    ) -> Result<Arc<FiniteGroup>, GroupError> {
        let members: Vec<ZmodMatrix> = (0..self.order())
            .map(|i| self.elem(i))
            .filter(|m| pred(m))
            .collect();
        self.subgroup_from_generators(&members)
    }

    fn adopt(self: &Arc<Self>, sub: Arc<FiniteGroup>) -> Arc<FiniteGroup> {
        let positions = (0..sub.order())
            .map(|i| {
                self.position_of(&sub.elem(i))
                    .expect("subgroup element missing from parent")
            })
            .collect();
        let mut sub = Arc::try_unwrap(sub).unwrap_or_else(|a| (*a).clone_shallow());
        sub.parent = Some((Arc::clone(self), positions));
        Arc::new(sub)
    }

    fn clone_shallow(&self) -> FiniteGroup {
        FiniteGroup {
            n: self.n,
            modulus: self.modulus,
            elem_data: self.elem_data.clone(),
            index: self.index.clone(),
            generator_positions: self.generator_positions.clone(),
            generators: self.generators.clone(),
            words: self.words.clone(),
            inverses: self.inverses.clone(),
            parent: self.parent.clone(),
        }
    }

    /// Positions of this subgroup's elements inside `ambient`. Works whether
    /// or not `ambient` is the recorded parent.
    pub fn positions_in(&self, ambient: &FiniteGroup) -> Result<Vec<u32>, GroupError> {
        (0..self.order())
            .map(|i| {
                ambient
                    .position_of(&self.elem(i))
                    .ok_or(GroupError::NotASubgroup)
            })
            .collect()
    }

    pub fn is_subgroup_of(&self, ambient: &FiniteGroup) -> bool {
        self.positions_in(ambient).is_ok()
    }

    /// Coset representatives, identity first, then in order of least
    /// canonical encoding (= least position) per coset.
    pub fn coset_transversal(
        self: &Arc<Self>,
        sub: &FiniteGroup,
        side: CosetSide,
    ) -> Result<Vec<u32>, GroupError> {
        let sub_pos = sub.positions_in(self)?;
        let mut covered = vec![false; self.order()];
        let mut reps = Vec::with_capacity(self.order() / sub.order());
        for g in 0..self.order() as u32 {
            if covered[g as usize] {
                continue;
            }
            reps.push(g);
            for &h in &sub_pos {
                let m = match side {
                    CosetSide::Right => self.mul(h, g), // coset Hg
                    CosetSide::Left => self.mul(g, h),  // coset gH
                };
                covered[m as usize] = true;
            }
        }
        Ok(reps)
    }

    /// Double cosets A\G/B as (representative, size) pairs; representatives
    /// are least-position elements, sizes sum to |G|.
    pub fn double_cosets(
        self: &Arc<Self>,
        a: &FiniteGroup,
        b: &FiniteGroup,
    ) -> Result<Vec<(u32, usize)>, GroupError> {
        let a_pos = a.positions_in(self)?;
        let b_pos = b.positions_in(self)?;
        let mut covered = vec![false; self.order()];
        let mut out = Vec::new();
        for g in 0..self.order() as u32 {
            if covered[g as usize] {
                continue;
            }
            let mut size = 0usize;
            for &x in &a_pos {
                let xg = self.mul(x, g);
                for &y in &b_pos {
                    let m = self.mul(xg, y);
                    if !covered[m as usize] {
                        covered[m as usize] = true;
                        size += 1;
                    }
                }
            }
            out.push((g, size));
        }
        Ok(out)
    }

    /// Conjugacy classes as (representative, size); representatives are the
    /// least-position member of each class. The class of the identity comes
    /// first.
    pub fn conjugacy_classes(&self) -> Vec<(u32, usize)> {
        self.class_data().classes.clone()
    }

    /// Full class data: classes plus the element -> class map.
    pub fn class_data(&self) -> ClassData {
        let mut class_of = vec![u32::MAX; self.order()];
        let mut classes = Vec::new();
        for g in 0..self.order() as u32 {
            if class_of[g as usize] != u32::MAX {
                continue;
            }
            let cid = classes.len() as u32;
            // Orbit of g under conjugation by generators = full class.
            let mut stack = vec![g];
            class_of[g as usize] = cid;
            let mut size = 0usize;
            while let Some(x) = stack.pop() {
                size += 1;
                for &s in &self.generator_positions {
                    let y = self.conj(s, x);
                    if class_of[y as usize] == u32::MAX {
                        class_of[y as usize] = cid;
                        stack.push(y);
                    }
                }
            }
            classes.push((g, size));
        }
        ClassData { classes, class_of }
    }

    /// Centralizer of a group element (by full scan).
    pub fn centralizer_of_element(self: &Arc<Self>, x: &ZmodMatrix) -> Arc<FiniteGroup> {
        let xp = self.position_of(x).expect("element of the group");
        self.subgroup_where(|m| {
            let g = self.position_of(m).unwrap();
            self.mul(g, xp) == self.mul(xp, g)
        })
        .expect("centralizer closure")
    }

    /// Stabilizer of a point under an arbitrary action; `act(g, point)` must
    /// return the image of `point`.
    pub fn stabilizer<P: Eq + Clone>(
        self: &Arc<Self>,
        point: &P,
        act: impl Fn(&ZmodMatrix, &P) -> P,
    ) -> Arc<FiniteGroup> {
        self.subgroup_where(|m| act(m, point) == *point)
            .expect("stabilizer closure")
    }

    /// Transporter set {g in G | act(g, from) == to}; not a subgroup.
    pub fn transporter<P: Eq + Clone>(
        &self,
        from: &P,
        to: &P,
        act: impl Fn(&ZmodMatrix, &P) -> P,
    ) -> Vec<u32> {
        (0..self.order() as u32)
            .filter(|&g| act(&self.elem(g as usize), from) == *to)
            .collect()
    }

    /// Normalizer of a subgroup (by full scan).
    pub fn normalizer(self: &Arc<Self>, sub: &FiniteGroup) -> Arc<FiniteGroup> {
        let sub_pos: Vec<u32> = sub.positions_in(self).expect("subgroup");
        let sub_set: std::collections::HashSet<u32> = sub_pos.iter().copied().collect();
        self.subgroup_where(|m| {
            let g = self.position_of(m).unwrap();
            sub_pos
                .iter()
                .all(|&h| sub_set.contains(&self.conj(g, h)))
        })
        .expect("normalizer closure")
    }

    /// True if `sub` is normal in `self`.
    pub fn is_normal(self: &Arc<Self>, sub: &FiniteGroup) -> bool {
        let sub_pos: Vec<u32> = match sub.positions_in(self) {
            Ok(p) => p,
            Err(_) => return false,
        };
        let sub_set: std::collections::HashSet<u32> = sub_pos.iter().copied().collect();
        self.generator_positions
            .iter()
            .all(|&g| sub_pos.iter().all(|&h| sub_set.contains(&self.conj(g, h))))
    }

    /// Exponent: lcm of element orders.
    pub fn exponent(&self) -> u64 {
        let mut exp = 1u64;
        for (rep, _) in self.conjugacy_classes() {
            let ord = self.element_order(rep);
            exp = lcm(exp, ord);
        }
        exp
    }

    pub fn element_order(&self, g: u32) -> u64 {
        let mut ord = 1u64;
        let mut x = g;
        while x != 0 {
            x = self.mul(x, g);
            ord += 1;
        }
        ord
    }

    /// All elements of the product set XY, as positions (deduplicated).
    pub fn product_set(&self, xs: &[u32], ys: &[u32]) -> Vec<u32> {
        let mut seen = vec![false; self.order()];
        let mut out = Vec::new();
        for &x in xs {
            for &y in ys {
                let m = self.mul(x, y);
                if !seen[m as usize] {
                    seen[m as usize] = true;
                    out.push(m);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CosetSide {
    Left,
    Right,
}

/// Conjugacy classes and the element -> class map.
#[derive(Clone)]
pub struct ClassData {
    /// (least-position representative, class size), identity class first.
    pub classes: Vec<(u32, usize)>,
    pub class_of: Vec<u32>,
}

impl ClassData {
    pub fn count(&self) -> usize {
        self.classes.len()
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / crate::zmod::gcd(a, b) * b
}

/// A homomorphism between enumerated groups, stored by generator images.
pub struct GroupHom {
    pub source: Arc<FiniteGroup>,
    pub target: Arc<FiniteGroup>,
    /// Image (as a target position) of each source generator.
    pub gen_images: Vec<u32>,
    /// Image of every source element, filled in construction order.
    images: Vec<u32>,
}

impl GroupHom {
    /// Build from a map on generators, propagating along the source's
    /// breadth-first words. Multiplicativity is checked on all generator
    /// pairs.
    pub fn from_generator_images(
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
        gen_images: Vec<u32>,
    ) -> Result<GroupHom, GroupError> {
        assert_eq!(gen_images.len(), source.generators.len());
        let mut images = vec![0u32; source.order()];
        for i in 0..source.order() {
            if let Some((parent, gen)) = source.words[i] {
                images[i] = target.mul(images[parent as usize], gen_images[gen as usize]);
            }
        }
        // Spot-check multiplicativity on all generator pairs.
        for &gi in &source.generator_positions {
            for &gj in &source.generator_positions {
                let prod = source.mul(gi, gj);
                let lhs = images[prod as usize];
                let rhs = target.mul(images[gi as usize], images[gj as usize]);
                if lhs != rhs {
                    return Err(GroupError::DecompositionFailed(
                        "generator images are not multiplicative".into(),
                    ));
                }
            }
        }
        Ok(GroupHom {
            source,
            target,
            gen_images,
            images,
        })
    }

    /// The entry-wise reduction map to a matrix group over a divisor modulus.
    pub fn reduction(
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
    ) -> Result<GroupHom, GroupError> {
        let gen_images = source
            .generators
            .iter()
            .map(|g| {
                target
                    .position_of(&g.reduce_mod(target.modulus))
                    .ok_or(GroupError::NotAMember)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_generator_images(source, target, gen_images)
    }

    #[inline]
    pub fn image_of(&self, g: u32) -> u32 {
        self.images[g as usize]
    }

    /// Kernel as a subgroup of the source.
    pub fn kernel(&self) -> Arc<FiniteGroup> {
        let members: Vec<ZmodMatrix> = (0..self.source.order())
            .filter(|&i| self.images[i] == 0)
            .map(|i| self.source.elem(i))
            .collect();
        self.source
            .subgroup_from_generators(&members)
            .expect("kernel closure")
    }

    pub fn is_surjective(&self) -> bool {
        let mut seen = vec![false; self.target.order()];
        let mut count = 0usize;
        for &im in &self.images {
            if !seen[im as usize] {
                seen[im as usize] = true;
                count += 1;
            }
        }
        count == self.target.order()
    }
}

/// A certified (virtual) Iwahori decomposition (U, L, V) of an ambient group,
/// together with the witness normal subgroup on which the product map is
/// bijective.
pub struct IwahoriTriple {
    pub ambient: Arc<FiniteGroup>,
    pub u: Arc<FiniteGroup>,
    pub l: Arc<FiniteGroup>,
    pub v: Arc<FiniteGroup>,
    /// True when the product map U x L x V -> G is bijective.
    pub actual: bool,
    pub witness: Option<Arc<FiniteGroup>>,
}

impl IwahoriTriple {
    /// Verify every defining condition and certify the triple:
    /// L normalizes U and V; the product map is injective (|ULV| = |U||L||V|);
    /// `actual` is set iff the products exhaust G. If a witness normal
    /// subgroup K is supplied, checks K is normal in G and that the product
    /// map of (U∩K, L∩K, V∩K) hits every element of K exactly once.
    pub fn certify(
        u: Arc<FiniteGroup>,
        l: Arc<FiniteGroup>,
        v: Arc<FiniteGroup>,
        ambient: Arc<FiniteGroup>,
        witness: Option<Arc<FiniteGroup>>,
    ) -> Result<IwahoriTriple, GroupError> {
        let up = u.positions_in(&ambient)?;
        let lp = l.positions_in(&ambient)?;
        let vp = v.positions_in(&ambient)?;
        // L normalizes U and V.
        for (name, grp_pos) in [("U", &up), ("V", &vp)] {
            let set: std::collections::HashSet<u32> = grp_pos.iter().copied().collect();
            for &lg in l.generator_positions.iter() {
                let lg_amb = ambient
                    .position_of(&l.elem(lg as usize))
                    .ok_or(GroupError::NotASubgroup)?;
                for &x in grp_pos.iter() {
                    if !set.contains(&ambient.conj(lg_amb, x)) {
                        return Err(GroupError::DecompositionFailed(format!(
                            "L does not normalize {name}"
                        )));
                    }
                }
            }
        }
        // Injectivity of the product map.
        let mut seen = vec![false; ambient.order()];
        let mut count = 0usize;
        for &x in &up {
            for &y in &lp {
                let xy = ambient.mul(x, y);
                for &z in &vp {
                    let m = ambient.mul(xy, z);
                    if seen[m as usize] {
                        return Err(GroupError::DecompositionFailed(
                            "product map U x L x V -> G is not injective".into(),
                        ));
                    }
                    seen[m as usize] = true;
                    count += 1;
                }
            }
        }
        debug_assert_eq!(count, up.len() * lp.len() * vp.len());
        let actual = count == ambient.order();
        if let Some(k) = &witness {
            if !ambient.is_normal(k) {
                return Err(GroupError::DecompositionFailed(
                    "witness subgroup is not normal".into(),
                ));
            }
            let kp: std::collections::HashSet<u32> =
                k.positions_in(&ambient)?.into_iter().collect();
            let uk: Vec<u32> = up.iter().copied().filter(|p| kp.contains(p)).collect();
            let lk: Vec<u32> = lp.iter().copied().filter(|p| kp.contains(p)).collect();
            let vk: Vec<u32> = vp.iter().copied().filter(|p| kp.contains(p)).collect();
            let mut seen_k = std::collections::HashSet::new();
            for &x in &uk {
                for &y in &lk {
                    let xy = ambient.mul(x, y);
                    for &z in &vk {
                        let m = ambient.mul(xy, z);
                        if !kp.contains(&m) || !seen_k.insert(m) {
                            return Err(GroupError::DecompositionFailed(
                                "witness product map is not injective into K".into(),
                            ));
                        }
                    }
                }
            }
            if seen_k.len() != kp.len() {
                return Err(GroupError::DecompositionFailed(
                    "witness product map does not cover K".into(),
                ));
            }
        }
        Ok(IwahoriTriple {
            ambient,
            u,
            l,
            v,
            actual,
            witness,
        })
    }

    /// The subgroup LU (as a product subgroup with stored factorizations).
    pub fn lu_subgroup(&self) -> Result<ProductSubgroup, GroupError> {
        ProductSubgroup::build(&self.ambient, &self.l, &self.u)
    }

    pub fn lv_subgroup(&self) -> Result<ProductSubgroup, GroupError> {
        ProductSubgroup::build(&self.ambient, &self.l, &self.v)
    }
}

/// The set LN for a subgroup N normalized by L, together with the
/// factorization of each element as l * n. Used to inflate L-modules to LN.
pub struct ProductSubgroup {
    pub group: Arc<FiniteGroup>,
    /// For each local element of `group`: (position in L, position in N).
    pub factors: Vec<(u32, u32)>,
    /// Positions of `group` elements in the ambient group.
    pub ambient_positions: Vec<u32>,
}

impl ProductSubgroup {
    pub fn build(
        ambient: &Arc<FiniteGroup>,
        l: &Arc<FiniteGroup>,
        n: &Arc<FiniteGroup>,
    ) -> Result<ProductSubgroup, GroupError> {
        let members: Vec<ZmodMatrix> = {
            let lp = l.positions_in(ambient)?;
            let np = n.positions_in(ambient)?;
            let mut seen = vec![false; ambient.order()];
            let mut out = Vec::new();
            for &x in &lp {
                for &y in &np {
                    let m = ambient.mul(x, y);
                    if !seen[m as usize] {
                        seen[m as usize] = true;
                        out.push(ambient.elem(m as usize));
                    }
                }
            }
            out
        };
        let group = ambient.subgroup_from_generators(&members)?;
        let mut factors = vec![(u32::MAX, u32::MAX); group.order()];
        for li in 0..l.order() as u32 {
            let lm = l.elem(li as usize);
            for ni in 0..n.order() as u32 {
                let nm = n.elem(ni as usize);
                let prod = lm.mul(&nm);
                if let Some(pos) = group.position_of(&prod) {
                    if factors[pos as usize].0 == u32::MAX {
                        factors[pos as usize] = (li, ni);
                    }
                }
            }
        }
        if factors.iter().any(|f| f.0 == u32::MAX) {
            return Err(GroupError::DecompositionFailed(
                "product subgroup has unfactored elements".into(),
            ));
        }
        let ambient_positions = group.positions_in(ambient)?;
        Ok(ProductSubgroup {
            group,
            factors,
            ambient_positions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zmod::Zmod;

    pub fn gl2_generators(modulus: u32) -> Vec<ZmodMatrix> {
        // A primitive root mod p^l together with the standard transvection
        // and Weyl element generate GL2(Z/p^l).
        let unit = (2..modulus)
            .find(|&z| {
                let mut seen = std::collections::HashSet::new();
                let mut x = Zmod::new(1, modulus);
                let z = Zmod::new(z as i64, modulus);
                if !z.is_unit() {
                    return false;
                }
                loop {
                    x = x.mul(z);
                    if !seen.insert(x.value) {
                        break;
                    }
                    if x.value == 1 {
                        break;
                    }
                }
                // z generates the full unit group
                let unit_count = (1..modulus).filter(|&v| Zmod::new(v as i64, modulus).is_unit()).count();
                seen.len() == unit_count
            })
            .expect("primitive root");
        vec![
            ZmodMatrix::from_rows(&[&[unit as i64, 0], &[0, 1]], modulus),
            ZmodMatrix::from_rows(&[&[1, 1], &[0, 1]], modulus),
            ZmodMatrix::from_rows(&[&[0, -1], &[1, 0]], modulus),
        ]
    }

    #[test]
    fn gl2_z4_order_96() {
        // Brute-force oracle: count all invertible 2x2 matrices over Z/4.
        let mut count = 0usize;
        for a in 0..4i64 {
            for b in 0..4i64 {
                for c in 0..4i64 {
                    for d in 0..4i64 {
                        let m = ZmodMatrix::from_rows(&[&[a, b], &[c, d]], 4);
                        if m.is_invertible() {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(count, 96);
        let g = FiniteGroup::generate(gl2_generators(4), 2, 4).unwrap();
        assert_eq!(g.order(), 96);
    }

    #[test]
    fn empty_generators_give_trivial_group() {
        let g = FiniteGroup::generate(vec![], 2, 9).unwrap();
        assert_eq!(g.order(), 1);
        assert!(g.elem(0).is_identity());
    }

    #[test]
    fn gl2_f3_structure() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        assert_eq!(g.order(), 48);

        // Borel subgroup: upper triangular. Oracle: (q-1)^2 q = 12 at q=3.
        let b = g
            .subgroup_where(|m| m.get(1, 0).is_zero())
            .unwrap();
        assert_eq!(b.order(), 12);

        // Coset transversal: |P^1(F3)| = 4 cosets.
        let reps = g.coset_transversal(&b, CosetSide::Right).unwrap();
        assert_eq!(reps.len(), 4);
        assert_eq!(reps[0], 0);

        // Bruhat: B\G/B has |W| = 2 double cosets.
        let dc = g.double_cosets(&b, &b).unwrap();
        assert_eq!(dc.len(), 2);
        assert_eq!(dc.iter().map(|&(_, s)| s).sum::<usize>(), 48);

        // Whole-group transversal and double coset are trivial.
        assert_eq!(g.coset_transversal(&g, CosetSide::Right).unwrap().len(), 1);
        assert_eq!(g.double_cosets(&g, &g).unwrap().len(), 1);

        // 8 conjugacy classes; oracle: independent full-orbit partition.
        let classes = g.conjugacy_classes();
        let mut covered = vec![false; g.order()];
        let mut naive = 0usize;
        for x in 0..g.order() as u32 {
            if covered[x as usize] {
                continue;
            }
            naive += 1;
            for h in 0..g.order() as u32 {
                covered[g.conj(h, x) as usize] = true;
            }
        }
        assert_eq!(naive, 8);
        assert_eq!(classes.len(), 8);
        assert_eq!(classes.iter().map(|&(_, s)| s).sum::<usize>(), 48);
        for &(_, s) in &classes {
            assert_eq!(48 % s, 0);
        }
    }

    #[test]
    fn reduction_kernel_order() {
        // Kernel of GL2(Z/9) -> GL2(F3) has order |M2(F3)| = 81.
        let g9 = FiniteGroup::generate(gl2_generators(9), 2, 9).unwrap();
        assert_eq!(g9.order(), 3888);
        let g3 = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let red = GroupHom::reduction(Arc::clone(&g9), Arc::clone(&g3)).unwrap();
        assert!(red.is_surjective());
        let k = red.kernel();
        assert_eq!(k.order(), 81);
        assert!(g9.is_normal(&k));
    }

    #[test]
    fn trivial_iwahori_triple_is_actual() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let triv = g
            .subgroup_from_generators(&[ZmodMatrix::identity(2, 3)])
            .unwrap();
        let t = IwahoriTriple::certify(
            Arc::clone(&triv),
            Arc::clone(&g),
            Arc::clone(&triv),
            Arc::clone(&g),
            Some(Arc::clone(&triv)),
        )
        .unwrap();
        assert!(t.actual);
    }

    #[test]
    fn torus_triple_of_gl2_is_virtual() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let u = g
            .subgroup_where(|m| m.get(0, 0).value == 1 && m.get(1, 1).value == 1 && m.get(1, 0).is_zero())
            .unwrap();
        let t = g
            .subgroup_where(|m| m.get(0, 1).is_zero() && m.get(1, 0).is_zero())
            .unwrap();
        let v = g
            .subgroup_where(|m| m.get(0, 0).value == 1 && m.get(1, 1).value == 1 && m.get(0, 1).is_zero())
            .unwrap();
        assert_eq!((u.order(), t.order(), v.order()), (3, 4, 3));
        let triv = g
            .subgroup_from_generators(&[ZmodMatrix::identity(2, 3)])
            .unwrap();
        let trip = IwahoriTriple::certify(u, t, v, Arc::clone(&g), Some(triv)).unwrap();
        assert!(!trip.actual); // 3*4*3 = 36 < 48
    }

    #[test]
    fn product_subgroup_factorization() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let u = g
            .subgroup_where(|m| m.get(0, 0).value == 1 && m.get(1, 1).value == 1 && m.get(1, 0).is_zero())
            .unwrap();
        let t = g
            .subgroup_where(|m| m.get(0, 1).is_zero() && m.get(1, 0).is_zero())
            .unwrap();
        let b = ProductSubgroup::build(&g, &t, &u).unwrap();
        assert_eq!(b.group.order(), 12);
        for i in 0..b.group.order() {
            let (li, ni) = b.factors[i];
            let prod = t.elem(li as usize).mul(&u.elem(ni as usize));
            assert_eq!(prod, b.group.elem(i));
        }
    }

    #[test]
    fn associativity_spot_check() {
        let g = FiniteGroup::generate(gl2_generators(4), 2, 4).unwrap();
        // Deterministic pseudo-random triples.
        let mut state = 0x12345678u64;
        for _ in 0..50 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (state >> 33) as u32 % g.order() as u32;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (state >> 33) as u32 % g.order() as u32;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let c = (state >> 33) as u32 % g.order() as u32;
            assert_eq!(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c)));
        }
    }
}
