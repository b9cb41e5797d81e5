//! Explicit complex modules: permutation and induced modules, averaging
//! idempotents, isotypic projectors, images of equivariant operators, and
//! exact multiplicity extraction.
//!
//! Numeric policy: characters and multiplicities are exact (integers checked
//! against a 1e-6 rounding tolerance and then frozen); module-level linear
//! algebra runs in double precision with gap-checked rank decisions.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chartab::{CharacterTable, ClassFunction, ClassInfo};
use crate::error::ModuleError;
use crate::group::FiniteGroup;
use crate::linalg::{column_space_basis, hermitian_eigen, CMat, C64};

/// Tolerance for deciding that a pairing is an integer multiplicity.
pub const MULT_TOL: f64 = 1e-6;
/// Tolerance for operator equivariance checks.
pub const EQUIVARIANCE_TOL: f64 = 1e-8;

/// An explicit complex representation, stored by generator images only;
/// matrices of arbitrary elements are evaluated lazily along the group's
/// breadth-first words.
#[derive(Clone)]
pub struct ModuleRep {
    pub group: Arc<FiniteGroup>,
    pub dim: usize,
    pub gen_mats: Vec<CMat>,
    /// Set when all entries are exactly rational (permutation-like bases).
    pub rational: bool,
}

impl std::fmt::Debug for ModuleRep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ModuleRep(dim {} over {:?})", self.dim, self.group)
    }
}

impl ModuleRep {
    pub fn trivial(group: Arc<FiniteGroup>) -> Self {
        let gen_mats = group.generators.iter().map(|_| CMat::identity(1)).collect();
        ModuleRep {
            group,
            dim: 1,
            gen_mats,
            rational: true,
        }
    }

    /// One-dimensional module from an exact degree-1 character.
    pub fn from_linear_character(chi: &ClassFunction) -> Self {
        let group = Arc::clone(&chi.classes.group);
        assert_eq!(chi.degree(), 1);
        let gen_mats = group
            .generator_positions
            .iter()
            .map(|&gp| {
                let mut m = CMat::zeros(1, 1);
                m.set(0, 0, chi.value_at(gp).embed());
                m
            })
            .collect();
        ModuleRep {
            group,
            dim: 1,
            gen_mats,
            rational: false,
        }
    }

    /// Matrix of an arbitrary element, by its breadth-first word.
    pub fn matrix_of(&self, pos: u32) -> CMat {
        match self.group.words[pos as usize] {
            None => CMat::identity(self.dim),
            Some((parent, gen)) => self
                .matrix_of(parent)
                .matmul(&self.gen_mats[gen as usize]),
        }
    }

    /// Matrices of every element of a subgroup, indexed by the subgroup's
    /// local positions. Seeds the subgroup's generators through ambient
    /// words, then propagates along the subgroup's own words.
    pub fn matrices_for(&self, sub: &Arc<FiniteGroup>) -> Vec<CMat> {
        assert!(
            sub.order() * self.dim * self.dim <= 60_000_000,
            "subgroup matrix table too large"
        );
        let gen_mats: Vec<CMat> = sub
            .generators
            .iter()
            .map(|g| {
                let amb = self
                    .group
                    .position_of(g)
                    .expect("subgroup generator in ambient group");
                self.matrix_of(amb)
            })
            .collect();
        let mut out: Vec<CMat> = Vec::with_capacity(sub.order());
        for i in 0..sub.order() {
            let m = match sub.words[i] {
                None => CMat::identity(self.dim),
                Some((parent, gen)) => out[parent as usize].matmul(&gen_mats[gen as usize]),
            };
            out.push(m);
        }
        out
    }

    /// Averaging projector e_H = (1/|H|) sum over H, as a matrix on this
    /// module. H is given as a subgroup whose elements lie in this group.
    pub fn averaging_projector(&self, sub: &Arc<FiniteGroup>) -> CMat {
        let mats = self.matrices_for(sub);
        let mut acc = CMat::zeros(self.dim, self.dim);
        for m in &mats {
            acc = acc.add(m);
        }
        acc.scale(C64::new(1.0 / sub.order() as f64, 0.0))
    }

    /// Isotypic projector e_chi as a matrix: (deg/|G|) sum ch(g^{-1}) rho(g).
    pub fn isotypic_projector(&self, chi: &ClassFunction) -> CMat {
        let group = &self.group;
        assert!(Arc::ptr_eq(&chi.classes.group, group));
        let mats = self.matrices_for(group);
        let embedded: Vec<C64> = chi.embed();
        let mut acc = CMat::zeros(self.dim, self.dim);
        for (pos, m) in mats.iter().enumerate() {
            let inv_class = chi.classes.class_of_pos(group.inv(pos as u32));
            let c = embedded[inv_class];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            acc = acc.add(&m.scale(c));
        }
        acc.scale(C64::new(
            chi.degree() as f64 / group.order() as f64,
            0.0,
        ))
    }

    /// Traces on class representatives.
    pub fn character_traces(&self, classes: &ClassInfo) -> Vec<Complex64> {
        classes
            .reps
            .iter()
            .map(|&r| self.matrix_of(r).trace())
            .collect()
    }

    /// Exact character: numeric traces paired against the exact table, with
    /// every multiplicity verified integral; the result is reconstructed
    /// exactly from the table rows.
    pub fn exact_character(
        &self,
        table: &CharacterTable,
    ) -> Result<ClassFunction, ModuleError> {
        let mults = self.multiplicities(table)?;
        Ok(table.character_from_multiplicities(&mults))
    }

    /// Exact irreducible multiplicities of this module.
    pub fn multiplicities(&self, table: &CharacterTable) -> Result<Vec<i64>, ModuleError> {
        let traces = self.character_traces(&table.classes);
        let mults = table.multiplicities_from_traces(&traces, MULT_TOL)?;
        let total: i64 = mults
            .iter()
            .zip(table.degrees())
            .map(|(&m, d)| m * d)
            .sum();
        if total != self.dim as i64 {
            return Err(ModuleError::NonIntegralMultiplicity {
                value: total as f64,
                tol: MULT_TOL,
            });
        }
        Ok(mults)
    }

    /// Multiplicity of one irreducible character.
    pub fn multiplicity_of(
        &self,
        table: &CharacterTable,
        idx: usize,
    ) -> Result<i64, ModuleError> {
        Ok(self.multiplicities(table)?[idx])
    }

    /// Tensor product over the same group.
    pub fn tensor(&self, other: &ModuleRep) -> ModuleRep {
        assert!(Arc::ptr_eq(&self.group, &other.group));
        let gen_mats = self
            .gen_mats
            .iter()
            .zip(other.gen_mats.iter())
            .map(|(a, b)| a.kron(b))
            .collect();
        ModuleRep {
            group: Arc::clone(&self.group),
            dim: self.dim * other.dim,
            gen_mats,
            rational: self.rational && other.rational,
        }
    }

    /// Twist by conjugation: a module of G becomes a module of cGc^{-1},
    /// acting through c^{-1} g c.
    pub fn ad_twist(
        &self,
        conjugator: &crate::zmod::ZmodMatrix,
        target: &Arc<FiniteGroup>,
    ) -> ModuleRep {
        let c_inv = conjugator.inverse().expect("conjugator invertible");
        let gen_mats = target
            .generators
            .iter()
            .map(|g| {
                let back = c_inv.mul(g).mul(conjugator);
                let pos = self
                    .group
                    .position_of(&back)
                    .expect("conjugate lands in source group");
                self.matrix_of(pos)
            })
            .collect();
        ModuleRep {
            group: Arc::clone(target),
            dim: self.dim,
            gen_mats,
            rational: self.rational,
        }
    }

    /// Restriction to a subgroup.
    pub fn restrict_to(&self, sub: &Arc<FiniteGroup>) -> ModuleRep {
        let gen_mats = sub
            .generators
            .iter()
            .map(|g| {
                let pos = self.group.position_of(g).expect("subgroup generator");
                self.matrix_of(pos)
            })
            .collect();
        ModuleRep {
            group: Arc::clone(sub),
            dim: self.dim,
            gen_mats,
            rational: self.rational,
        }
    }

    /// Spot-check the homomorphism property and unitarity on words.
    pub fn check_consistency(&self, samples: usize, seed: u64) -> Result<(), ModuleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self.group.order() as u32;
        for _ in 0..samples {
            let a = rng.gen_range(0..order);
            let b = rng.gen_range(0..order);
            let ab = self.group.mul(a, b);
            let lhs = self.matrix_of(a).matmul(&self.matrix_of(b));
            let rhs = self.matrix_of(ab);
            let resid = lhs.sub(&rhs).max_abs();
            if resid > EQUIVARIANCE_TOL {
                return Err(ModuleError::NotEquivariant(resid));
            }
            let u = self.matrix_of(a);
            let resid = u.adjoint().matmul(&u).sub(&CMat::identity(self.dim)).max_abs();
            if resid > EQUIVARIANCE_TOL {
                return Err(ModuleError::NotEquivariant(resid));
            }
        }
        Ok(())
    }
}

/// An element of the group algebra H(G) with the counting-measure
/// convolution, stored densely over element positions.
#[derive(Clone)]
pub struct GAElement {
    pub group: Arc<FiniteGroup>,
    pub coeffs: Vec<C64>,
}

impl GAElement {
    pub fn zero(group: Arc<FiniteGroup>) -> Self {
        let coeffs = vec![C64::new(0.0, 0.0); group.order()];
        GAElement { group, coeffs }
    }

    pub fn delta(group: Arc<FiniteGroup>, pos: u32) -> Self {
        let mut e = Self::zero(group);
        e.coeffs[pos as usize] = C64::new(1.0, 0.0);
        e
    }

    /// Averaging idempotent e_H of a subgroup, supported on H's positions in
    /// this group.
    pub fn averaging(group: &Arc<FiniteGroup>, sub: &FiniteGroup) -> Self {
        let positions = sub.positions_in(group).expect("subgroup positions");
        let mut e = Self::zero(Arc::clone(group));
        let w = C64::new(1.0 / positions.len() as f64, 0.0);
        for p in positions {
            e.coeffs[p as usize] = w;
        }
        e
    }

    /// The idempotent e_chi of an irreducible character of this group.
    pub fn isotypic(chi: &ClassFunction) -> Self {
        let group = Arc::clone(&chi.classes.group);
        let embedded = chi.embed();
        let scale = chi.degree() as f64 / group.order() as f64;
        let mut e = Self::zero(Arc::clone(&group));
        for g in 0..group.order() as u32 {
            let c = embedded[chi.classes.class_of_pos(group.inv(g))];
            e.coeffs[g as usize] = c * scale;
        }
        e
    }

    /// Convolution product: (f*h)(x) = sum_y f(y) h(y^{-1} x).
    pub fn convolve(&self, other: &GAElement) -> GAElement {
        assert!(Arc::ptr_eq(&self.group, &other.group));
        let g = &self.group;
        let mut out = Self::zero(Arc::clone(g));
        for y in 0..g.order() as u32 {
            let fy = self.coeffs[y as usize];
            if fy.norm_sqr() == 0.0 {
                continue;
            }
            for z in 0..g.order() as u32 {
                let hz = other.coeffs[z as usize];
                if hz.norm_sqr() == 0.0 {
                    continue;
                }
                let x = g.mul(y, z);
                out.coeffs[x as usize] += fy * hz;
            }
        }
        out
    }

    /// Action on a module: sum of coefficients times element matrices.
    pub fn apply_to(&self, module: &ModuleRep) -> CMat {
        assert!(Arc::ptr_eq(&self.group, &module.group));
        let mut acc = CMat::zeros(module.dim, module.dim);
        for g in 0..self.group.order() as u32 {
            let c = self.coeffs[g as usize];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            acc = acc.add(&module.matrix_of(g).scale(c));
        }
        acc
    }

    pub fn is_proportional_to(&self, other: &GAElement, tol: f64) -> Option<C64> {
        let (mut num, mut den) = (C64::new(0.0, 0.0), 0.0f64);
        for (a, b) in self.coeffs.iter().zip(other.coeffs.iter()) {
            num += a * b.conj();
            den += b.norm_sqr();
        }
        if den < tol {
            return None;
        }
        let c = num / den;
        let resid: f64 = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a - c * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if resid <= tol * scale.max(1.0) && c.norm() > tol {
            Some(c)
        } else {
            None
        }
    }
}

/// An induced representation Ind_H^G(sigma) in structured form: the action
/// of any group element is block-monomial over a right-coset transversal,
/// which keeps isotypic projections cheap even when the ambient group is
/// large.
pub struct InducedModule {
    pub ambient: Arc<FiniteGroup>,
    pub sub: Arc<FiniteGroup>,
    /// Positions of `sub`'s elements inside `ambient`.
    pub sub_positions: Vec<u32>,
    /// Ambient position -> local position in `sub` (only for members).
    local_of: HashMap<u32, u32>,
    /// Right-coset transversal (ambient positions), identity first.
    pub transversal: Vec<u32>,
    /// Ambient position -> index of its coset in the transversal.
    coset_of: Vec<u32>,
    /// sigma(h) for every local h of `sub`.
    pub sigma_mats: Vec<CMat>,
    pub dim_sigma: usize,
}

impl InducedModule {
    pub fn build(
        ambient: &Arc<FiniteGroup>,
        sub: &Arc<FiniteGroup>,
        sigma: &ModuleRep,
    ) -> Result<InducedModule, crate::error::GroupError> {
        assert!(Arc::ptr_eq(&sigma.group, sub));
        let sub_positions = sub.positions_in(ambient)?;
        let mut local_of = HashMap::new();
        for (local, &amb) in sub_positions.iter().enumerate() {
            local_of.insert(amb, local as u32);
        }
        let mut coset_of = vec![u32::MAX; ambient.order()];
        let mut transversal = Vec::new();
        for g in 0..ambient.order() as u32 {
            if coset_of[g as usize] != u32::MAX {
                continue;
            }
            let idx = transversal.len() as u32;
            transversal.push(g);
            for &h in &sub_positions {
                coset_of[ambient.mul(h, g) as usize] = idx;
            }
        }
        let sigma_mats = sigma.matrices_for(sub);
        Ok(InducedModule {
            ambient: Arc::clone(ambient),
            sub: Arc::clone(sub),
            sub_positions,
            local_of,
            transversal,
            coset_of,
            dim_sigma: sigma.dim,
            sigma_mats,
        })
    }

    pub fn dim(&self) -> usize {
        self.transversal.len() * self.dim_sigma
    }

    /// Index of the coset containing an ambient element.
    #[inline]
    pub fn coset_index_of(&self, ambient_pos: u32) -> usize {
        self.coset_of[ambient_pos as usize] as usize
    }

    /// sigma-matrix of a subgroup element given by its ambient position.
    #[inline]
    pub fn sigma_matrix_at_ambient(&self, ambient_pos: u32) -> &CMat {
        let local = self.local_of[&ambient_pos];
        &self.sigma_mats[local as usize]
    }

    /// For element g and source coset index j: the target coset index and
    /// the sigma-matrix of the connecting subgroup element.
    /// g sends basis block j to block j' with factor sigma(t_{j'} g t_j^{-1}).
    #[inline]
    fn action_block(&self, g: u32, j: usize) -> (usize, &CMat) {
        let amb = &self.ambient;
        let tj = self.transversal[j];
        let x = amb.mul(tj, amb.inv(g));
        let jp = self.coset_of[x as usize] as usize;
        let h = amb.mul(amb.mul(self.transversal[jp], g), amb.inv(tj));
        let local = self.local_of[&h];
        (jp, &self.sigma_mats[local as usize])
    }

    /// Dense matrix of an arbitrary element.
    pub fn dense_matrix_of(&self, g: u32) -> CMat {
        let nb = self.transversal.len();
        let d = self.dim_sigma;
        let mut m = CMat::zeros(nb * d, nb * d);
        for j in 0..nb {
            let (jp, block) = self.action_block(g, j);
            for r in 0..d {
                for c in 0..d {
                    m.set(jp * d + r, j * d + c, block.get(r, c));
                }
            }
        }
        m
    }

    /// Apply the element action to a set of stacked columns.
    pub fn apply_to_columns(&self, g: u32, cols: &CMat) -> CMat {
        let nb = self.transversal.len();
        let d = self.dim_sigma;
        assert_eq!(cols.rows, nb * d);
        let mut out = CMat::zeros(cols.rows, cols.cols);
        for j in 0..nb {
            let (jp, block) = self.action_block(g, j);
            for c in 0..cols.cols {
                for r in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for s in 0..d {
                        acc += block.get(r, s) * cols.get(j * d + s, c);
                    }
                    out.add_assign_at(jp * d + r, c, acc);
                }
            }
        }
        out
    }

    /// Dense module (generator matrices only).
    pub fn dense_module(&self) -> ModuleRep {
        let gen_mats = self
            .ambient
            .generator_positions
            .iter()
            .map(|&g| self.dense_matrix_of(g))
            .collect();
        ModuleRep {
            group: Arc::clone(&self.ambient),
            dim: self.dim(),
            gen_mats,
            rational: false,
        }
    }

    /// Exact character of the induced module via the Frobenius formula.
    pub fn exact_character(
        &self,
        ambient_classes: &Arc<ClassInfo>,
        sigma_char: &ClassFunction,
    ) -> ClassFunction {
        crate::chartab::induce(sigma_char, &self.sub_positions, ambient_classes)
    }

    /// Selected columns of the isotypic projector e_chi on this module,
    /// accumulated in a single pass over the ambient group.
    pub fn isotypic_columns(&self, chi: &ClassFunction, selected: &[usize]) -> CMat {
        let amb = &self.ambient;
        let d = self.dim_sigma;
        let embedded = chi.embed();
        let mut out = CMat::zeros(self.dim(), selected.len());
        let scale = chi.degree() as f64 / amb.order() as f64;
        for g in 0..amb.order() as u32 {
            let coef = embedded[chi.classes.class_of_pos(amb.inv(g))] * scale;
            if coef.norm_sqr() < 1e-30 {
                continue;
            }
            for (cidx, &col) in selected.iter().enumerate() {
                let (j, s) = (col / d, col % d);
                let (jp, block) = self.action_block(g, j);
                for r in 0..d {
                    out.add_assign_at(jp * d + r, cidx, coef * block.get(r, s));
                }
            }
        }
        out
    }
}

/// Permutation module H(G/H): the induced module of the trivial character.
pub fn permutation_module(
    ambient: &Arc<FiniteGroup>,
    sub: &Arc<FiniteGroup>,
) -> Result<ModuleRep, crate::error::GroupError> {
    let triv = ModuleRep::trivial(Arc::clone(sub));
    let ind = InducedModule::build(ambient, sub, &triv)?;
    let mut m = ind.dense_module();
    m.rational = true;
    Ok(m)
}

/// Image of an equivariant operator as a module of `sub`.
///
/// `op` must commute with the action of `sub` on `module` (checked on
/// generators to `EQUIVARIANCE_TOL`); the image carries the compressed
/// `sub`-action in an orthonormal basis of the column space.
pub fn image_module(
    module: &ModuleRep,
    op: &CMat,
    sub: &Arc<FiniteGroup>,
) -> Result<ModuleRep, ModuleError> {
    let sub_gens: Vec<CMat> = sub
        .generators
        .iter()
        .map(|g| {
            let pos = module.group.position_of(g).expect("subgroup generator");
            module.matrix_of(pos)
        })
        .collect();
    let scale = op.max_abs().max(1.0);
    for m in &sub_gens {
        let resid = m.matmul(op).sub(&op.matmul(m)).max_abs();
        if resid > EQUIVARIANCE_TOL * scale {
            return Err(ModuleError::NotEquivariant(resid / scale));
        }
    }
    let (_svals, q) = column_space_basis(op)?;
    let qh = q.adjoint();
    let gen_mats: Vec<CMat> = sub_gens.iter().map(|m| qh.matmul(&m.matmul(&q))).collect();
    // Invariance of the image under the compressed generators.
    for (m, g) in sub_gens.iter().zip(gen_mats.iter()) {
        let reconstructed = q.matmul(g);
        let direct = m.matmul(&q);
        let resid = reconstructed.sub(&direct).max_abs();
        if resid > 1e-7 {
            return Err(ModuleError::NotEquivariant(resid));
        }
    }
    Ok(ModuleRep {
        group: Arc::clone(sub),
        dim: q.cols,
        gen_mats,
        rational: false,
    })
}

/// Extract one irreducible copy from an isotypic module W = tau^{+m}.
///
/// A generic Hermitian element of the commutant is produced either by exact
/// group averaging (small groups) or by iterating the generator-averaging
/// contraction; its top eigenspace of dimension deg(tau) spans one copy.
pub fn split_isotypic_copy(
    w: &ModuleRep,
    degree: usize,
    seed: u64,
) -> Result<ModuleRep, ModuleError> {
    if w.dim == degree {
        return Ok(w.clone());
    }
    assert_eq!(w.dim % degree, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..4 {
        let mut x = CMat::zeros(w.dim, w.dim);
        for i in 0..w.dim {
            for j in 0..w.dim {
                x.set(
                    i,
                    j,
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        let xh = x.adjoint();
        let x = x.add(&xh).scale(C64::new(0.5, 0.0));
        let averaged = commutant_average(w, &x)?;
        let (vals, vecs) = hermitian_eigen(&averaged);
        // Leading cluster must have size exactly `degree`.
        let spread = (vals[0] - vals[w.dim - 1]).abs().max(1e-12);
        let mut cluster = 1usize;
        while cluster < w.dim && (vals[cluster - 1] - vals[cluster]).abs() < 1e-6 * spread {
            cluster += 1;
        }
        if cluster != degree {
            continue; // degenerate draw; retry with a fresh random element
        }
        let cols: Vec<Vec<C64>> = (0..degree).map(|j| vecs.column(j)).collect();
        let q = CMat::from_columns(w.dim, &cols);
        let qh = q.adjoint();
        let gen_mats: Vec<CMat> = w
            .gen_mats
            .iter()
            .map(|m| qh.matmul(&m.matmul(&q)))
            .collect();
        let out = ModuleRep {
            group: Arc::clone(&w.group),
            dim: degree,
            gen_mats,
            rational: false,
        };
        if out.check_consistency(12, seed ^ 0x5eed).is_ok() {
            return Ok(out);
        }
        let _ = attempt;
    }
    Err(ModuleError::ModelNotFound {
        degree: degree as u64,
    })
}

/// Project a matrix onto the commutant of the module action.
fn commutant_average(w: &ModuleRep, x: &CMat) -> Result<CMat, ModuleError> {
    let order = w.group.order();
    let cost = order as f64 * (w.dim as f64).powi(3);
    if cost <= 2e9 {
        // Exact projection: average over the whole group.
        let mats = w.matrices_for(&w.group);
        let mut acc = CMat::zeros(w.dim, w.dim);
        for m in &mats {
            acc = acc.add(&m.matmul(&x.matmul(&m.adjoint())));
        }
        return Ok(acc.scale(C64::new(1.0 / order as f64, 0.0)));
    }
    // Iterate the contraction X -> (X + avg_g g X g^{-1})/2 over generators
    // and their inverses; its fixed space is exactly the commutant.
    let gens: Vec<CMat> = w.gen_mats.clone();
    let mut cur = x.clone();
    for _ in 0..3000 {
        let mut acc = CMat::zeros(w.dim, w.dim);
        for g in &gens {
            acc = acc.add(&g.matmul(&cur.matmul(&g.adjoint())));
            acc = acc.add(&g.adjoint().matmul(&cur.matmul(g)));
        }
        let next = cur
            .scale(C64::new(0.5, 0.0))
            .add(&acc.scale(C64::new(0.25 / gens.len() as f64, 0.0)));
        let delta = next.sub(&cur).max_abs();
        cur = next;
        if delta < 1e-13 {
            break;
        }
    }
    // Verify commutation.
    let scale = cur.max_abs().max(1.0);
    for g in &gens {
        let resid = g.matmul(&cur).sub(&cur.matmul(g)).max_abs();
        if resid > 1e-10 * scale {
            return Err(ModuleError::NotEquivariant(resid / scale));
        }
    }
    Ok(cur)
}

/// A library of explicit models for every irreducible character of a group,
/// aligned with the rows of its character table.
pub struct ModelLibrary {
    pub table: Arc<CharacterTable>,
    pub models: Vec<ModuleRep>,
}

impl ModelLibrary {
    pub fn model(&self, idx: usize) -> &ModuleRep {
        &self.models[idx]
    }

    /// Verify that every model realizes its row exactly.
    pub fn verify(&self) -> Result<(), ModuleError> {
        for (idx, model) in self.models.iter().enumerate() {
            let mults = model.multiplicities(&self.table)?;
            for (j, &m) in mults.iter().enumerate() {
                let expect = i64::from(j == idx);
                if m != expect {
                    return Err(ModuleError::ModelNotFound {
                        degree: self.table.degrees()[idx] as u64,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A seed for the model-library builder: a subgroup with a module (and its
/// exact character) to induce from.
pub struct Seed {
    pub sub: Arc<FiniteGroup>,
    pub sigma: ModuleRep,
    pub sigma_char: ClassFunction,
}

/// Build explicit models for all irreducible characters.
///
/// Strategy: degree-1 rows come straight from the table; higher rows are
/// split out of induced seed modules (multiplicity-free seeds preferred,
/// isotypic splitting otherwise), and any still-missing rows are hunted in
/// tensor products of models already found.
pub fn build_model_library(
    table: &Arc<CharacterTable>,
    mut seeds: Vec<Seed>,
    seed_rng: u64,
) -> Result<ModelLibrary, ModuleError> {
    let group = Arc::clone(&table.classes.group);
    let count = table.count();
    let mut models: Vec<Option<ModuleRep>> = vec![None; count];
    for (idx, chi) in table.irreducibles.iter().enumerate() {
        if chi.degree() == 1 {
            models[idx] = Some(ModuleRep::from_linear_character(chi));
        }
    }
    // Default seeds: cyclic subgroups generated by class representatives,
    // with all their linear characters, in ascending index order.
    if seeds.is_empty() {
        seeds = cyclic_seeds(&group, table)?;
    }

    let mut missing: Vec<usize> = (0..count).filter(|&i| models[i].is_none()).collect();
    // Pass 1: multiplicity-free appearances; pass 2: any appearance.
    for pass in 0..2 {
        if missing.is_empty() {
            break;
        }
        for seed in &seeds {
            if missing.is_empty() {
                break;
            }
            let ind = InducedModule::build(&group, &seed.sub, &seed.sigma)
                .map_err(|_| ModuleError::NotAProduct)?;
            let ind_char = ind.exact_character(&table.classes, &seed.sigma_char);
            let mults = table
                .decompose(&ind_char)
                .map_err(|_| ModuleError::ModelNotFound { degree: 0 })?;
            for &idx in missing.clone().iter() {
                let m = mults[idx];
                if m <= 0 || (pass == 0 && m != 1) {
                    continue;
                }
                if let Ok(model) =
                    split_from_induced(&ind, table, idx, m as usize, seed_rng ^ idx as u64)
                {
                    models[idx] = Some(model);
                    missing.retain(|&i| i != idx);
                }
            }
        }
    }
    // Tensor hunt for whatever remains (typically cuspidal-type rows).
    let mut guard = 0usize;
    while !missing.is_empty() {
        guard += 1;
        if guard > 4 * count {
            return Err(ModuleError::ModelNotFound {
                degree: table.degrees()[missing[0]] as u64,
            });
        }
        let found: Vec<usize> = (0..count).filter(|&i| models[i].is_some()).collect();
        // Candidate pairs ordered by product dimension.
        let mut pairs: Vec<(usize, usize, i64)> = Vec::new();
        for &a in &found {
            for &b in &found {
                if a <= b {
                    let d = table.degrees()[a] * table.degrees()[b];
                    if d > 1 {
                        pairs.push((a, b, d));
                    }
                }
            }
        }
        pairs.sort_by_key(|&(a, b, d)| (d, a, b));
        let mut progressed = false;
        'pairs: for (a, b, _) in pairs {
            let prod_char =
                table.irreducibles[a].mul_pointwise(&table.irreducibles[b]);
            let mults = table
                .decompose(&prod_char)
                .map_err(|_| ModuleError::ModelNotFound { degree: 0 })?;
            let hit = missing
                .iter()
                .copied()
                .find(|&idx| mults[idx] > 0);
            let Some(idx) = hit else { continue };
            let w_full = models[a].as_ref().unwrap().tensor(models[b].as_ref().unwrap());
            let proj = w_full.isotypic_projector(&table.irreducibles[idx]);
            let iso = image_module(&w_full, &proj, &group)?;
            let model = split_isotypic_copy(
                &iso,
                table.degrees()[idx] as usize,
                seed_rng ^ (idx as u64) << 8,
            )?;
            let check = model.multiplicities(table)?;
            if check[idx] == 1 && check.iter().sum::<i64>() == 1 {
                models[idx] = Some(model);
                missing.retain(|&i| i != idx);
                progressed = true;
                break 'pairs;
            }
        }
        if !progressed {
            return Err(ModuleError::ModelNotFound {
                degree: table.degrees()[missing[0]] as u64,
            });
        }
    }
    let lib = ModelLibrary {
        table: Arc::clone(table),
        models: models.into_iter().map(Option::unwrap).collect(),
    };
    lib.verify()?;
    Ok(lib)
}

/// Extract the model for row `idx` out of an induced module where it appears
/// with multiplicity `mult`.
fn split_from_induced(
    ind: &InducedModule,
    table: &Arc<CharacterTable>,
    idx: usize,
    mult: usize,
    seed: u64,
) -> Result<ModuleRep, ModuleError> {
    let chi = &table.irreducibles[idx];
    let deg = chi.degree() as usize;
    let rank = mult * deg;
    let dim = ind.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sel_count = (rank + 8).min(dim);
    for _attempt in 0..3 {
        let mut selected: Vec<usize> = (0..dim).collect();
        // Deterministic shuffle.
        for i in (1..selected.len()).rev() {
            let j = rng.gen_range(0..=i);
            selected.swap(i, j);
        }
        selected.truncate(sel_count);
        selected.sort_unstable();
        let cols = ind.isotypic_columns(chi, &selected);
        let (svals, q) = column_space_basis(&cols)?;
        let _ = svals;
        if q.cols < rank {
            sel_count = (sel_count * 2).min(dim);
            continue;
        }
        if q.cols > rank {
            return Err(ModuleError::RankAmbiguous {
                gap: 0.0,
                required: crate::linalg::RANK_GAP,
            });
        }
        // Compress the generator action onto the isotypic basis.
        let qh = q.adjoint();
        let gen_mats: Vec<CMat> = ind
            .ambient
            .generator_positions
            .iter()
            .map(|&g| qh.matmul(&ind.apply_to_columns(g, &q)))
            .collect();
        let w = ModuleRep {
            group: Arc::clone(&ind.ambient),
            dim: rank,
            gen_mats,
            rational: false,
        };
        w.check_consistency(10, seed ^ 0xabcd)?;
        let model = if mult == 1 {
            w
        } else {
            split_isotypic_copy(&w, deg, seed ^ 0xfeed)?
        };
        // The model must realize exactly this row.
        let mults = model.multiplicities(table)?;
        if mults[idx] != 1 || mults.iter().sum::<i64>() != 1 {
            return Err(ModuleError::ModelNotFound { degree: deg as u64 });
        }
        return Ok(model);
    }
    Err(ModuleError::ModelNotFound { degree: deg as u64 })
}

/// Default seeds: the cyclic subgroups generated by class representatives,
/// each with all of its linear characters.
fn cyclic_seeds(
    group: &Arc<FiniteGroup>,
    table: &Arc<CharacterTable>,
) -> Result<Vec<Seed>, ModuleError> {
    let mut seen_subgroups: Vec<Vec<u32>> = Vec::new();
    let mut seeds = Vec::new();
    let mut class_reps: Vec<u32> = table.classes.reps.clone();
    // Larger cyclic subgroups first: smaller induced dimension.
    class_reps.sort_by_key(|&r| std::cmp::Reverse(table.classes.orders
        [table.classes.class_of_pos(r)]));
    for rep in class_reps {
        if rep == 0 {
            continue;
        }
        let sub = group
            .subgroup_from_generators(&[group.elem(rep as usize)])
            .map_err(|_| ModuleError::NotAProduct)?;
        let mut positions = sub.positions_in(group).unwrap();
        positions.sort_unstable();
        if seen_subgroups.contains(&positions) {
            continue;
        }
        seen_subgroups.push(positions);
        let sub_table =
            crate::chartab::character_table(Arc::clone(&sub)).map_err(|_| {
                ModuleError::ModelNotFound { degree: 0 }
            })?;
        for chi in &sub_table.irreducibles {
            if chi.degree() == 1 {
                seeds.push(Seed {
                    sub: Arc::clone(&sub),
                    sigma: ModuleRep::from_linear_character(chi),
                    sigma_char: chi.clone(),
                });
            }
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartab::{character_table, permutation_character};
    use crate::zmod::ZmodMatrix;

    fn gl2_generators(modulus: u32) -> Vec<ZmodMatrix> {
        let unit = (2..modulus)
            .find(|&z| {
                let mut pow = 1u64;
                let mut count = 0;
                loop {
                    pow = pow * z as u64 % modulus as u64;
                    count += 1;
                    if pow == 1 {
                        break;
                    }
                }
                let units = (1..modulus)
                    .filter(|&v| crate::zmod::gcd(v as u64, modulus as u64) == 1)
                    .count();
                count == units
            })
            .unwrap();
        vec![
            ZmodMatrix::from_rows(&[&[unit as i64, 0], &[0, 1]], modulus),
            ZmodMatrix::from_rows(&[&[1, 1], &[0, 1]], modulus),
            ZmodMatrix::from_rows(&[&[0, -1], &[1, 0]], modulus),
        ]
    }

    #[test]
    fn permutation_module_dimensions() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let m = permutation_module(&g, &b).unwrap();
        assert_eq!(m.dim, 4);
        m.check_consistency(20, 7).unwrap();

        // Whole group: trivial one-dimensional module.
        let whole = permutation_module(&g, &g).unwrap();
        assert_eq!(whole.dim, 1);
    }

    #[test]
    fn averaging_projector_ranks() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let m = permutation_module(&g, &b).unwrap();

        // e_G on the permutation module projects onto the trivial part: rank 1.
        let eg = m.averaging_projector(&g);
        // Idempotent and self-adjoint to 1e-9.
        assert!(eg.matmul(&eg).sub(&eg).max_abs() < 1e-9);
        assert!(eg.adjoint().sub(&eg).max_abs() < 1e-9);
        let (svals, q) = column_space_basis(&eg).unwrap();
        assert_eq!(q.cols, 1);
        assert!((svals[0] - 1.0).abs() < 1e-9);

        // e_B on H(G/B) has rank 2 = number of B-orbits on G/B (Bruhat).
        let eb = m.averaging_projector(&b);
        let (_svals, qb) = column_space_basis(&eb).unwrap();
        let bruhat = g.double_cosets(&b, &b).unwrap().len();
        assert_eq!(qb.cols, bruhat);
        assert_eq!(qb.cols, 2);

        // Identity element acts as the identity matrix.
        assert!(m.matrix_of(0).is_identity_within(1e-12));
    }

    #[test]
    fn multiplicities_of_permutation_module() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let m = permutation_module(&g, &b).unwrap();
        let mults = m.multiplicities(&t).unwrap();
        // Exact character equals the permutation character.
        let b_pos = b.positions_in(&g).unwrap();
        let perm = permutation_character(&t.classes, &b_pos);
        assert_eq!(t.character_from_multiplicities(&mults), perm);
        // Trivial appears exactly once.
        assert_eq!(mults[t.trivial_index()], 1);
        // Sum of mult * deg = dim.
        let total: i64 = mults.iter().zip(t.degrees()).map(|(&m, d)| m * d).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn image_module_of_identity_and_eg() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let m = permutation_module(&g, &b).unwrap();

        // T = identity: same character.
        let id = CMat::identity(m.dim);
        let same = image_module(&m, &id, &g).unwrap();
        assert_eq!(
            same.exact_character(&t).unwrap(),
            m.exact_character(&t).unwrap()
        );

        // T = e_G on a nontrivial irreducible: zero module.
        let lib = build_model_library(&t, vec![], 42).unwrap();
        let nontriv = (0..t.count()).find(|&i| i != t.trivial_index()).unwrap();
        let model = lib.model(nontriv);
        let eg = model.averaging_projector(&g);
        let z = image_module(model, &eg, &g).unwrap();
        assert_eq!(z.dim, 0);
    }

    #[test]
    fn model_library_for_gl2_f3() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        let lib = build_model_library(&t, vec![], 1).unwrap();
        assert_eq!(lib.models.len(), 8);
        for (i, model) in lib.models.iter().enumerate() {
            assert_eq!(model.dim as i64, t.degrees()[i]);
            model.check_consistency(10, i as u64).unwrap();
        }
        // Regular-module cross-check: e_chi on the regular module has rank
        // deg^2, so the regular module contains each model deg times.
        let triv = g
            .subgroup_from_generators(&[ZmodMatrix::identity(2, 3)])
            .unwrap();
        let reg = permutation_module(&g, &triv).unwrap();
        let mults = reg.multiplicities(&t).unwrap();
        assert_eq!(
            mults,
            t.degrees(),
            "regular module contains each irreducible deg times"
        );
    }

    #[test]
    fn ga_element_convolution() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        // delta_g * delta_h = delta_{gh} under counting measure.
        let a = 5u32.min(g.order() as u32 - 1);
        let b = 7u32.min(g.order() as u32 - 1);
        let da = GAElement::delta(Arc::clone(&g), a);
        let db = GAElement::delta(Arc::clone(&g), b);
        let dab = da.convolve(&db);
        let expect = GAElement::delta(Arc::clone(&g), g.mul(a, b));
        let resid: f64 = dab
            .coeffs
            .iter()
            .zip(expect.coeffs.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        assert!(resid < 1e-20);

        // e_H is idempotent under convolution.
        let b_sub = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let eh = GAElement::averaging(&g, &b_sub);
        let eh2 = eh.convolve(&eh);
        let resid: f64 = eh2
            .coeffs
            .iter()
            .zip(eh.coeffs.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        assert!(resid < 1e-18);
    }

    #[test]
    fn tensor_and_ad_twist_preserve_characters() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        let lib = build_model_library(&t, vec![], 3).unwrap();
        let two = (0..t.count()).find(|&i| t.degrees()[i] == 2).unwrap();
        let m = lib.model(two);
        // Tensor square character = pointwise square.
        let sq = m.tensor(m);
        let expect = t.irreducibles[two].mul_pointwise(&t.irreducibles[two]);
        assert_eq!(sq.exact_character(&t).unwrap(), expect);
        // Inner twist by a group element fixes the character.
        let c = g.elem(10);
        let tw = m.ad_twist(&c, &g);
        assert_eq!(
            tw.exact_character(&t).unwrap(),
            t.irreducibles[two].clone()
        );
    }
}
