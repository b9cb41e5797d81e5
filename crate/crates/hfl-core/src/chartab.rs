//! Complete complex character tables with exact cyclotomic values.
//!
//! Tables are computed Dixon-style: class-multiplication matrices are
//! simultaneously diagonalized over a prime field F_e with e = 1 (mod
//! exponent), degrees and values are recovered modulo e, and eigenvalue
//! multiplicities lift the values exactly into Z[zeta_m].

use std::sync::Arc;

use num_complex::Complex64;

use crate::cyclotomic::Cyclotomic;
use crate::error::TableError;
use crate::group::{ClassData, FiniteGroup, GroupHom};

/// Conjugacy-class bookkeeping shared by all class functions of one group.
pub struct ClassInfo {
    pub group: Arc<FiniteGroup>,
    /// Least-position representative per class, identity class first.
    pub reps: Vec<u32>,
    pub sizes: Vec<usize>,
    /// Element position -> class index.
    pub class_of: Vec<u32>,
    /// Class index of the inverse class.
    pub inverse_class: Vec<u32>,
    /// Order of the representative (constant on the class).
    pub orders: Vec<u64>,
    pub exponent: u64,
}

impl ClassInfo {
    pub fn compute(group: Arc<FiniteGroup>) -> Arc<ClassInfo> {
        let ClassData { classes, class_of } = group.class_data();
        let reps: Vec<u32> = classes.iter().map(|&(r, _)| r).collect();
        let sizes: Vec<usize> = classes.iter().map(|&(_, s)| s).collect();
        let inverse_class: Vec<u32> = reps
            .iter()
            .map(|&r| class_of[group.inv(r) as usize])
            .collect();
        let orders: Vec<u64> = reps.iter().map(|&r| group.element_order(r)).collect();
        let exponent = orders.iter().fold(1u64, |a, &b| lcm(a, b));
        Arc::new(ClassInfo {
            group,
            reps,
            sizes,
            class_of,
            inverse_class,
            orders,
            exponent,
        })
    }

    pub fn count(&self) -> usize {
        self.reps.len()
    }

    #[inline]
    pub fn class_of_pos(&self, g: u32) -> usize {
        self.class_of[g as usize] as usize
    }
}

/// An exact class function; irreducible characters are rows of a table.
#[derive(Clone)]
pub struct ClassFunction {
    pub classes: Arc<ClassInfo>,
    pub values: Vec<Cyclotomic>,
}

/// The spec-level name for class functions arising as characters.
pub type Character = ClassFunction;

impl std::fmt::Debug for ClassFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ClassFunction{:?}", self.values)
    }
}

impl PartialEq for ClassFunction {
    fn eq(&self, other: &Self) -> bool {
        debug_assert!(Arc::ptr_eq(&self.classes, &other.classes));
        let m = lcm(
            self.values.iter().map(|v| v.conductor).fold(1, lcm),
            other.values.iter().map(|v| v.conductor).fold(1, lcm),
        );
        self.values
            .iter()
            .zip(other.values.iter())
            .all(|(a, b)| a.lift_to(m) == b.lift_to(m))
    }
}
impl Eq for ClassFunction {}

impl ClassFunction {
    pub fn zero(classes: Arc<ClassInfo>) -> Self {
        let values = vec![Cyclotomic::zero(1); classes.count()];
        ClassFunction { classes, values }
    }

    pub fn trivial(classes: Arc<ClassInfo>) -> Self {
        let values = vec![Cyclotomic::one(1); classes.count()];
        ClassFunction { classes, values }
    }

    pub fn regular(classes: Arc<ClassInfo>) -> Self {
        let order = classes.group.order() as i64;
        let mut values = vec![Cyclotomic::zero(1); classes.count()];
        values[0] = Cyclotomic::from_integer(order, 1);
        ClassFunction { classes, values }
    }

    /// Degree: the value at the identity, which must be a rational integer.
    pub fn degree(&self) -> i64 {
        self.values[0].as_integer().expect("degree is an integer")
    }

    pub fn value_at(&self, g: u32) -> &Cyclotomic {
        &self.values[self.classes.class_of_pos(g)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn add(&self, other: &ClassFunction) -> ClassFunction {
        debug_assert!(Arc::ptr_eq(&self.classes, &other.classes));
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.add(b))
            .collect();
        ClassFunction {
            classes: Arc::clone(&self.classes),
            values,
        }
    }

    pub fn sub(&self, other: &ClassFunction) -> ClassFunction {
        debug_assert!(Arc::ptr_eq(&self.classes, &other.classes));
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.sub(b))
            .collect();
        ClassFunction {
            classes: Arc::clone(&self.classes),
            values,
        }
    }

    pub fn mul_pointwise(&self, other: &ClassFunction) -> ClassFunction {
        debug_assert!(Arc::ptr_eq(&self.classes, &other.classes));
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.mul(b))
            .collect();
        ClassFunction {
            classes: Arc::clone(&self.classes),
            values,
        }
    }

    pub fn scale(&self, n: i64) -> ClassFunction {
        let values = self.values.iter().map(|v| v.scale(n)).collect();
        ClassFunction {
            classes: Arc::clone(&self.classes),
            values,
        }
    }

    /// Exact Hermitian inner product (1/|G|) sum |C| a(C) conj(b(C)).
    /// Integral for characters of actual representations; an inconsistent
    /// virtual input surfaces as a non-integral result.
    pub fn inner_product(&self, other: &ClassFunction) -> Result<i64, TableError> {
        debug_assert!(Arc::ptr_eq(&self.classes, &other.classes));
        let mut acc = Cyclotomic::zero(1);
        for c in 0..self.classes.count() {
            // conj(b(C)) = b(C^{-1}) for characters; use honest conjugation
            // so the formula is right for arbitrary class functions too.
            let term = self.values[c]
                .mul(&other.values[c].conj())
                .scale(self.classes.sizes[c] as i64);
            acc = acc.add(&term);
        }
        let order = self.classes.group.order() as i64;
        let q = acc
            .div_exact(order)
            .ok_or(TableError::NonIntegralInnerProduct)?;
        q.as_integer().ok_or(TableError::NonIntegralInnerProduct)
    }

    /// Complex embedding of the value on each class.
    pub fn embed(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v.embed()).collect()
    }
}

/// Frobenius induction of a class function along a subgroup inclusion.
pub fn induce(
    chi: &ClassFunction,
    sub_in_ambient: &[u32],
    ambient: &Arc<ClassInfo>,
) -> ClassFunction {
    let g = &ambient.group;
    let h_classes = &chi.classes;
    let h_group = &h_classes.group;
    // Position-in-ambient -> position-in-subgroup lookup.
    let mut local_of = std::collections::HashMap::new();
    for (local, &amb) in sub_in_ambient.iter().enumerate() {
        local_of.insert(amb, local as u32);
    }
    let mut values = Vec::with_capacity(ambient.count());
    for c in 0..ambient.count() {
        let rep = ambient.reps[c];
        let mut acc = Cyclotomic::zero(1);
        for x in 0..g.order() as u32 {
            let conj = g.conj(g.inv(x), rep);
            if let Some(&local) = local_of.get(&conj) {
                acc = acc.add(&chi.values[h_classes.class_of_pos(local)]);
            }
        }
        let v = acc
            .div_exact(h_group.order() as i64)
            .expect("induction formula is integral over |H|");
        values.push(v);
    }
    ClassFunction {
        classes: Arc::clone(ambient),
        values,
    }
}

/// Restriction of a class function to a subgroup.
pub fn restrict(
    chi: &ClassFunction,
    sub_in_ambient: &[u32],
    sub: &Arc<ClassInfo>,
) -> ClassFunction {
    let values = sub
        .reps
        .iter()
        .map(|&r| {
            let amb = sub_in_ambient[r as usize];
            chi.values[chi.classes.class_of_pos(amb)].clone()
        })
        .collect();
    ClassFunction {
        classes: Arc::clone(sub),
        values,
    }
}

/// Inflation of a class function along a surjection (pullback).
pub fn inflate(chi: &ClassFunction, hom: &GroupHom, source: &Arc<ClassInfo>) -> ClassFunction {
    debug_assert!(Arc::ptr_eq(&chi.classes.group, &hom.target));
    let values = source
        .reps
        .iter()
        .map(|&r| chi.values[chi.classes.class_of_pos(hom.image_of(r))].clone())
        .collect();
    ClassFunction {
        classes: Arc::clone(source),
        values,
    }
}

/// Permutation character of G acting on the cosets G/H.
pub fn permutation_character(
    ambient: &Arc<ClassInfo>,
    sub_in_ambient: &[u32],
) -> ClassFunction {
    let g = &ambient.group;
    let sub_set: std::collections::HashSet<u32> = sub_in_ambient.iter().copied().collect();
    let transversal = {
        let mut covered = vec![false; g.order()];
        let mut reps = Vec::new();
        for x in 0..g.order() as u32 {
            if covered[x as usize] {
                continue;
            }
            reps.push(x);
            for &h in sub_in_ambient {
                covered[g.mul(h, x) as usize] = true;
            }
        }
        reps
    };
    let mut values = Vec::with_capacity(ambient.count());
    for c in 0..ambient.count() {
        let rep = ambient.reps[c];
        // Fixed cosets Ht with H t rep = H t, i.e. t rep t^{-1} in H.
        let fixed = transversal
            .iter()
            .filter(|&&t| sub_set.contains(&g.conj(t, rep)))
            .count();
        values.push(Cyclotomic::from_integer(fixed as i64, 1));
    }
    ClassFunction {
        classes: Arc::clone(ambient),
        values,
    }
}

/// A complete character table: all irreducible characters, in deterministic
/// order (by degree, then lexicographically by value encoding).
pub struct CharacterTable {
    pub classes: Arc<ClassInfo>,
    pub irreducibles: Vec<ClassFunction>,
    /// Cached complex embeddings of the irreducible rows.
    embedded: Vec<Vec<Complex64>>,
}

impl CharacterTable {
    pub fn count(&self) -> usize {
        self.irreducibles.len()
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.irreducibles.iter().map(|c| c.degree()).collect()
    }

    pub fn embedded_row(&self, i: usize) -> &[Complex64] {
        &self.embedded[i]
    }

    /// Rebuild a table from stored rows (cache load). Light validation:
    /// degree sum and row count; the heavy orthogonality checks ran when the
    /// table was first computed and the file is digest-protected.
    pub fn from_rows(
        classes: Arc<ClassInfo>,
        rows: Vec<ClassFunction>,
    ) -> Result<Arc<CharacterTable>, TableError> {
        if rows.len() != classes.count() {
            return Err(TableError::Inconsistent(
                "row count differs from class count".into(),
            ));
        }
        let order = classes.group.order() as i64;
        let deg_sq: i64 = rows.iter().map(|c| c.degree() * c.degree()).sum();
        if deg_sq != order {
            return Err(TableError::Inconsistent(format!(
                "sum of squared degrees {deg_sq} != group order {order}"
            )));
        }
        let embedded = rows.iter().map(|c| c.embed()).collect();
        Ok(Arc::new(CharacterTable {
            classes,
            irreducibles: rows,
            embedded,
        }))
    }

    /// Index of the trivial character.
    pub fn trivial_index(&self) -> usize {
        self.irreducibles
            .iter()
            .position(|c| c.values.iter().all(|v| v.as_integer() == Some(1)))
            .expect("every table contains the trivial character")
    }

    /// Exact multiplicities of each irreducible in a module given its traces
    /// on class representatives (numeric). Fails if any pairing strays from
    /// an integer by more than `tol`.
    pub fn multiplicities_from_traces(
        &self,
        traces: &[Complex64],
        tol: f64,
    ) -> Result<Vec<i64>, crate::error::ModuleError> {
        let order = self.classes.group.order() as f64;
        let mut out = Vec::with_capacity(self.count());
        for (i, _chi) in self.irreducibles.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.classes.count() {
                acc += traces[c] * self.embedded[i][c].conj() * (self.classes.sizes[c] as f64);
            }
            acc /= order;
            let rounded = acc.re.round();
            if (acc.re - rounded).abs() > tol || acc.im.abs() > tol || rounded < -0.5 {
                return Err(crate::error::ModuleError::NonIntegralMultiplicity {
                    value: acc.re,
                    tol,
                });
            }
            out.push(rounded as i64);
        }
        Ok(out)
    }

    /// Exact character from irreducible multiplicities.
    pub fn character_from_multiplicities(&self, mults: &[i64]) -> ClassFunction {
        let mut acc = ClassFunction::zero(Arc::clone(&self.classes));
        for (i, &m) in mults.iter().enumerate() {
            if m != 0 {
                acc = acc.add(&self.irreducibles[i].scale(m));
            }
        }
        acc
    }

    /// Decompose an exact character into irreducible multiplicities.
    pub fn decompose(&self, chi: &ClassFunction) -> Result<Vec<i64>, TableError> {
        self.irreducibles
            .iter()
            .map(|irr| chi.inner_product(irr))
            .collect()
    }

    /// First-orthogonality self-check plus the degree sum; cheap enough to
    /// run at construction for every group in scope.
    fn validate(&self) -> Result<(), TableError> {
        let order = self.classes.group.order() as i64;
        let deg_sq: i64 = self.degrees().iter().map(|d| d * d).sum();
        if deg_sq != order {
            return Err(TableError::Inconsistent(format!(
                "sum of squared degrees {deg_sq} != group order {order}"
            )));
        }
        for (i, a) in self.irreducibles.iter().enumerate() {
            for (j, b) in self.irreducibles.iter().enumerate() {
                let ip = a.inner_product(b)?;
                if ip != i64::from(i == j) {
                    return Err(TableError::Inconsistent(format!(
                        "row orthogonality failed at ({i},{j}): {ip}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Column orthogonality: sum over irreducibles of chi(g) conj(chi(h)) is
    /// |centralizer(g)| when g ~ h and 0 otherwise. Exact.
    pub fn verify_column_orthogonality(&self) -> Result<(), TableError> {
        let order = self.classes.group.order();
        for gc in 0..self.classes.count() {
            for hc in 0..self.classes.count() {
                let mut acc = Cyclotomic::zero(1);
                for chi in &self.irreducibles {
                    acc = acc.add(&chi.values[gc].mul(&chi.values[hc].conj()));
                }
                let expect = if gc == hc {
                    (order / self.classes.sizes[gc]) as i64
                } else {
                    0
                };
                if acc.as_integer() != Some(expect) {
                    return Err(TableError::Inconsistent(format!(
                        "column orthogonality failed at ({gc},{hc})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compute the full character table of an enumerated group.
pub fn character_table(group: Arc<FiniteGroup>) -> Result<Arc<CharacterTable>, TableError> {
    let classes = ClassInfo::compute(group);
    character_table_with_classes(classes)
}

pub fn character_table_with_classes(
    classes: Arc<ClassInfo>,
) -> Result<Arc<CharacterTable>, TableError> {
    let r = classes.count();
    let order = classes.group.order() as u64;
    let exponent = classes.exponent;
    let e = find_auxiliary_prime(exponent, order)?;
    let omegas = simultaneous_eigenvectors(&classes, e);
    debug_assert_eq!(omegas.len(), r);

    // Degrees: d^2 = |G| / sum_i w_i w_{i*} / |C_i| (mod e), then a modular
    // square root pinned to the representative below e/2.
    let mut rows: Vec<ClassFunction> = Vec::with_capacity(r);
    let zgen = primitive_root_of_unity(e, exponent);
    for omega in &omegas {
        let mut s = 0u64;
        for i in 0..r {
            let wi = omega[i];
            let wistar = omega[classes.inverse_class[i] as usize];
            let ci_inv = inv_mod(classes.sizes[i] as u64 % e, e);
            s = (s + mul_mod(mul_mod(wi, wistar, e), ci_inv, e)) % e;
        }
        let d_sq = mul_mod(order % e, inv_mod(s, e), e);
        let d = sqrt_mod(d_sq, e).ok_or_else(|| {
            TableError::Inconsistent("degree square has no modular root".into())
        })?;
        let d = if d <= e / 2 { d } else { e - d };
        // Character values mod e.
        let chi_mod: Vec<u64> = (0..r)
            .map(|i| {
                let ci_inv = inv_mod(classes.sizes[i] as u64 % e, e);
                mul_mod(mul_mod(d, omega[i], e), ci_inv, e)
            })
            .collect();
        // Lift each value through eigenvalue multiplicities.
        let values = lift_character(&classes, &chi_mod, d, e, zgen, exponent)?;
        rows.push(ClassFunction {
            classes: Arc::clone(&classes),
            values,
        });
    }

    // Deterministic row order: by degree, then by value encoding in class
    // order.
    rows.sort_by(|a, b| {
        a.degree().cmp(&b.degree()).then_with(|| {
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                let ord = x.sort_key().cmp(&y.sort_key());
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let embedded = rows.iter().map(|c| c.embed()).collect();
    let table = CharacterTable {
        classes,
        irreducibles: rows,
        embedded,
    };
    table.validate()?;
    Ok(Arc::new(table))
}

/// Lift character values from F_e to exact cyclotomic integers via the
/// eigenvalue-multiplicity discrete Fourier inversion.
fn lift_character(
    classes: &Arc<ClassInfo>,
    chi_mod: &[u64],
    degree: u64,
    e: u64,
    zgen: u64,
    exponent: u64,
) -> Result<Vec<Cyclotomic>, TableError> {
    let g = &classes.group;
    let r = classes.count();
    let mut values = Vec::with_capacity(r);
    for i in 0..r {
        let d = classes.orders[i];
        // Classes of powers rep^l for l = 0..d.
        let rep = classes.reps[i];
        let mut pow_class = Vec::with_capacity(d as usize);
        let mut x = 0u32; // identity
        for _ in 0..d {
            pow_class.push(classes.class_of_pos(x));
            x = g.mul(x, rep);
        }
        let zd = pow_mod(zgen, exponent / d, e); // primitive d-th root in F_e
        let zd_inv = inv_mod(zd, e);
        let d_inv = inv_mod(d % e, e);
        let mut value = Cyclotomic::zero(exponent);
        let mut total = 0u64;
        for k in 0..d {
            let mut acc = 0u64;
            let mut w = 1u64; // zd^{-kl}
            let step = pow_mod(zd_inv, k, e);
            for l in 0..d {
                acc = (acc + mul_mod(chi_mod[pow_class[l as usize]], w, e)) % e;
                w = mul_mod(w, step, e);
            }
            let nk = mul_mod(acc, d_inv, e);
            if nk > degree {
                return Err(TableError::Inconsistent(format!(
                    "eigenvalue multiplicity {nk} exceeds degree {degree}"
                )));
            }
            if nk != 0 {
                total += nk;
                let root = Cyclotomic::root_of_unity(exponent, (k * (exponent / d)) as i64);
                value = value.add(&root.scale(nk as i64));
            }
        }
        if total != degree {
            return Err(TableError::Inconsistent(format!(
                "eigenvalue multiplicities sum to {total}, expected {degree}"
            )));
        }
        values.push(value);
    }
    Ok(values)
}

/// Find all r simultaneous eigenvectors of the class-multiplication matrices
/// over F_e, normalized so the identity-class coordinate is 1. The returned
/// vectors are the central-character value rows (omega_chi(K_i))_i.
fn simultaneous_eigenvectors(classes: &Arc<ClassInfo>, e: u64) -> Vec<Vec<u64>> {
    let r = classes.count();
    // Subspaces as row-basis matrices over F_e, in the full r-dim space.
    let mut subspaces: Vec<Vec<Vec<u64>>> = vec![identity_rows(r)];
    for i in 1..r {
        if subspaces.iter().all(|s| s.len() == 1) {
            break;
        }
        let bi = class_matrix(classes, i, e);
        let mut next = Vec::new();
        for basis in subspaces.into_iter() {
            if basis.len() == 1 {
                next.push(basis);
                continue;
            }
            // Restrict bi to the subspace: solve bi * v_b = sum coeffs.
            let k = basis.len();
            let mut restricted = vec![vec![0u64; k]; k];
            for (bidx, v) in basis.iter().enumerate() {
                let mut w = vec![0u64; r];
                for (row, wr) in w.iter_mut().enumerate() {
                    let mut acc = 0u64;
                    for c in 0..r {
                        if v[c] != 0 && bi[row][c] != 0 {
                            acc = (acc + mul_mod(bi[row][c], v[c], e)) % e;
                        }
                    }
                    *wr = acc;
                }
                let coeffs = solve_in_span(&basis, &w, e)
                    .expect("class matrices preserve eigenspace intersections");
                for (j, c) in coeffs.into_iter().enumerate() {
                    restricted[j][bidx] = c;
                }
            }
            for (lambda, null_basis) in eigen_split(&restricted, e) {
                let _ = lambda;
                let mapped: Vec<Vec<u64>> = null_basis
                    .into_iter()
                    .map(|coeffs| {
                        let mut v = vec![0u64; r];
                        for (j, &c) in coeffs.iter().enumerate() {
                            if c != 0 {
                                for idx in 0..r {
                                    v[idx] = (v[idx] + mul_mod(c, basis[j][idx], e)) % e;
                                }
                            }
                        }
                        v
                    })
                    .collect();
                next.push(mapped);
            }
        }
        subspaces = next;
    }
    let mut out: Vec<Vec<u64>> = subspaces
        .into_iter()
        .map(|basis| {
            assert_eq!(basis.len(), 1, "class algebra did not fully split");
            let v = &basis[0];
            let v0_inv = inv_mod(v[0], e);
            v.iter().map(|&x| mul_mod(x, v0_inv, e)).collect()
        })
        .collect();
    // Deterministic order before degree sorting happens later.
    out.sort();
    out
}

/// Class-multiplication matrix M_i with M_i[j][k] = #{x in C_i : x^{-1} g_k in C_j};
/// the omega rows are its eigenvectors with eigenvalue omega(K_i).
fn class_matrix(classes: &Arc<ClassInfo>, i: usize, e: u64) -> Vec<Vec<u64>> {
    let g = &classes.group;
    let r = classes.count();
    let mut m = vec![vec![0u64; r]; r];
    // Members of class i.
    let members: Vec<u32> = (0..g.order() as u32)
        .filter(|&x| classes.class_of_pos(x) == i)
        .collect();
    for &x in &members {
        let xi = g.inv(x);
        for k in 0..r {
            let y = g.mul(xi, classes.reps[k]);
            let j = classes.class_of_pos(y);
            m[j][k] = (m[j][k] + 1) % e;
        }
    }
    m
}

fn identity_rows(r: usize) -> Vec<Vec<u64>> {
    (0..r)
        .map(|i| {
            let mut v = vec![0u64; r];
            v[i] = 1;
            v
        })
        .collect()
}

/// Solve `target` as a linear combination of `basis` rows over F_e.
fn solve_in_span(basis: &[Vec<u64>], target: &[u64], e: u64) -> Option<Vec<u64>> {
    let k = basis.len();
    let r = target.len();
    // Augmented system: columns are basis vectors.
    let mut a = vec![vec![0u64; k + 1]; r];
    for (j, b) in basis.iter().enumerate() {
        for i in 0..r {
            a[i][j] = b[i];
        }
    }
    for i in 0..r {
        a[i][k] = target[i];
    }
    // Gaussian elimination.
    let mut pivot_rows = Vec::new();
    let mut row = 0usize;
    for col in 0..k {
        let piv = (row..r).find(|&i| a[i][col] != 0)?;
        a.swap(row, piv);
        let inv = inv_mod(a[row][col], e);
        for j in col..=k {
            a[row][j] = mul_mod(a[row][j], inv, e);
        }
        for i in 0..r {
            if i != row && a[i][col] != 0 {
                let f = a[i][col];
                for j in col..=k {
                    let sub = mul_mod(f, a[row][j], e);
                    a[i][j] = (a[i][j] + e - sub) % e;
                }
            }
        }
        pivot_rows.push(row);
        row += 1;
        if row == r {
            break;
        }
    }
    // Consistency: remaining rows must have zero RHS.
    for i in row..r {
        if a[i][k] != 0 {
            return None;
        }
    }
    let mut coeffs = vec![0u64; k];
    for (col, &prow) in pivot_rows.iter().enumerate() {
        coeffs[col] = a[prow][k];
    }
    Some(coeffs)
}

/// Eigen-decomposition of a k x k matrix over F_e: characteristic polynomial
/// by Hessenberg reduction, root scan, then nullspace per eigenvalue.
fn eigen_split(m: &[Vec<u64>], e: u64) -> Vec<(u64, Vec<Vec<u64>>)> {
    let k = m.len();
    let poly = char_poly(m, e);
    let mut out = Vec::new();
    for lambda in 0..e {
        if poly_eval(&poly, lambda, e) == 0 {
            let null = nullspace(&sub_lambda(m, lambda, e), e);
            if !null.is_empty() {
                out.push((lambda, null));
            }
        }
    }
    debug_assert_eq!(out.iter().map(|(_, b)| b.len()).sum::<usize>(), k);
    out
}

fn sub_lambda(m: &[Vec<u64>], lambda: u64, e: u64) -> Vec<Vec<u64>> {
    let k = m.len();
    let mut a = m.to_vec();
    for i in 0..k {
        a[i][i] = (a[i][i] + e - lambda) % e;
    }
    a
}

/// Characteristic polynomial via Hessenberg reduction, coefficients lowest
/// degree first, monic.
fn char_poly(m: &[Vec<u64>], e: u64) -> Vec<u64> {
    let k = m.len();
    let mut h = m.to_vec();
    // Similarity reduction to upper Hessenberg.
    for col in 0..k.saturating_sub(2) {
        let piv = ((col + 1)..k).find(|&i| h[i][col] != 0);
        let Some(piv) = piv else { continue };
        if piv != col + 1 {
            h.swap(piv, col + 1);
            for row in h.iter_mut() {
                row.swap(piv, col + 1);
            }
        }
        let inv = inv_mod(h[col + 1][col], e);
        for i in (col + 2)..k {
            if h[i][col] == 0 {
                continue;
            }
            let f = mul_mod(h[i][col], inv, e);
            // row_i -= f * row_{col+1}
            for j in 0..k {
                let sub = mul_mod(f, h[col + 1][j], e);
                h[i][j] = (h[i][j] + e - sub) % e;
            }
            // col_{col+1} += f * col_i
            for rowv in h.iter_mut() {
                let add = mul_mod(f, rowv[i], e);
                rowv[col + 1] = (rowv[col + 1] + add) % e;
            }
        }
    }
    // Recurrence on leading principal minors of (xI - H).
    // p_0 = 1; p_j = (x - h[j-1][j-1]) p_{j-1}
    //             - sum_{i<j-1} h[i][j-1] (prod of subdiagonals) p_i.
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for j in 1..=k {
        let mut p = poly_shift_mul(&polys[j - 1], h[j - 1][j - 1], e);
        let mut subdiag = 1u64;
        for i in (0..j - 1).rev() {
            subdiag = mul_mod(subdiag, h[i + 1][i], e);
            if subdiag == 0 {
                break;
            }
            let c = mul_mod(h[i][j - 1], subdiag, e);
            if c != 0 {
                for (idx, &coef) in polys[i].iter().enumerate() {
                    let sub = mul_mod(c, coef, e);
                    p[idx] = (p[idx] + e - sub) % e;
                }
            }
        }
        polys.push(p);
    }
    polys.pop().unwrap()
}

/// (x - c) * p over F_e.
fn poly_shift_mul(p: &[u64], c: u64, e: u64) -> Vec<u64> {
    let mut out = vec![0u64; p.len() + 1];
    for (i, &coef) in p.iter().enumerate() {
        out[i + 1] = (out[i + 1] + coef) % e;
        let sub = mul_mod(c, coef, e);
        out[i] = (out[i] + e - sub) % e;
    }
    out
}

fn poly_eval(p: &[u64], x: u64, e: u64) -> u64 {
    let mut acc = 0u64;
    for &c in p.iter().rev() {
        acc = (mul_mod(acc, x, e) + c) % e;
    }
    acc
}

/// Nullspace basis (row vectors) of a over F_e.
fn nullspace(a: &[Vec<u64>], e: u64) -> Vec<Vec<u64>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut m = a.to_vec();
    let mut pivot_col_of_row = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        let piv = (row..rows).find(|&i| m[i][col] != 0);
        let Some(piv) = piv else { continue };
        m.swap(row, piv);
        let inv = inv_mod(m[row][col], e);
        for j in 0..cols {
            m[row][j] = mul_mod(m[row][j], inv, e);
        }
        for i in 0..rows {
            if i != row && m[i][col] != 0 {
                let f = m[i][col];
                for j in 0..cols {
                    let sub = mul_mod(f, m[row][j], e);
                    m[i][j] = (m[i][j] + e - sub) % e;
                }
            }
        }
        pivot_col_of_row.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    let pivot_cols: std::collections::HashSet<usize> =
        pivot_col_of_row.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![0u64; cols];
        v[free] = 1;
        for (prow, &pcol) in pivot_col_of_row.iter().enumerate() {
            let c = m[prow][free];
            if c != 0 {
                v[pcol] = e - c;
            }
        }
        basis.push(v);
    }
    basis
}

// ---- modular arithmetic over the auxiliary prime ----

#[inline]
fn mul_mod(a: u64, b: u64, e: u64) -> u64 {
    ((a as u128 * b as u128) % e as u128) as u64
}

fn pow_mod(mut b: u64, mut exp: u64, e: u64) -> u64 {
    let mut acc = 1u64;
    b %= e;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, b, e);
        }
        b = mul_mod(b, b, e);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, e: u64) -> u64 {
    pow_mod(a, e - 2, e)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime e = 1 (mod exponent) with e > 2 sqrt(|G|).
pub fn find_auxiliary_prime(exponent: u64, order: u64) -> Result<u64, TableError> {
    let lower = 2.0 * (order as f64).sqrt();
    let mut e = exponent + 1;
    let bound = exponent.saturating_mul(100_000).max(1_000_000);
    while e <= bound {
        if (e as f64) > lower && is_prime(e) {
            return Ok(e);
        }
        e += exponent;
    }
    Err(TableError::NoAuxiliaryPrime { exponent, bound })
}

/// An element of order `m` in F_e^* (requires m | e-1).
fn primitive_root_of_unity(e: u64, m: u64) -> u64 {
    assert_eq!((e - 1) % m, 0);
    // Find a generator of F_e^* by factoring e-1 and testing.
    let mut factors = Vec::new();
    let mut n = e - 1;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            factors.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    let gen = (2..e)
        .find(|&g| factors.iter().all(|&f| pow_mod(g, (e - 1) / f, e) != 1))
        .expect("prime field has a generator");
    pow_mod(gen, (e - 1) / m, e)
}

/// Tonelli-Shanks square root modulo an odd prime.
fn sqrt_mod(a: u64, e: u64) -> Option<u64> {
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (e - 1) / 2, e) != 1 {
        return None;
    }
    if e % 4 == 3 {
        return Some(pow_mod(a, (e + 1) / 4, e));
    }
    // Write e-1 = q 2^s.
    let mut q = e - 1;
    let mut s = 0u32;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let z = (2..e)
        .find(|&z| pow_mod(z, (e - 1) / 2, e) == e - 1)
        .unwrap();
    let mut m = s;
    let mut c = pow_mod(z, q, e);
    let mut t = pow_mod(a, q, e);
    let mut r = pow_mod(a, (q + 1) / 2, e);
    while t != 1 {
        let mut i = 0u32;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, e);
            i += 1;
            if i == m {
                return None;
            }
        }
        let b = pow_mod(c, 1 << (m - i - 1), e);
        m = i;
        c = mul_mod(b, b, e);
        t = mul_mod(t, c, e);
        r = mul_mod(r, b, e);
    }
    Some(r)
}

fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / crate::zmod::gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zmod::ZmodMatrix;

    fn perm_matrix(perm: &[usize], modulus: u32) -> ZmodMatrix {
        let n = perm.len();
        let mut m = ZmodMatrix::zero(n, modulus);
        for (j, &i) in perm.iter().enumerate() {
            m.set(i, j, crate::zmod::Zmod::one(modulus));
        }
        m
    }

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
    fn trivial_group_table() {
        let g = FiniteGroup::generate(vec![], 1, 2).unwrap();
        let t = character_table(g).unwrap();
        assert_eq!(t.degrees(), vec![1]);
    }

    #[test]
    fn symmetric_group_on_three_letters() {
        // S3 as 3x3 permutation matrices over F2.
        let gens = vec![
            perm_matrix(&[1, 0, 2], 2), // transposition
            perm_matrix(&[1, 2, 0], 2), // 3-cycle
        ];
        let g = FiniteGroup::generate(gens, 3, 2).unwrap();
        assert_eq!(g.order(), 6);
        let t = character_table(g).unwrap();
        assert_eq!(t.degrees(), vec![1, 1, 2]);
        // Standard character values on (1, transposition, 3-cycle) classes.
        let std_char = &t.irreducibles[2];
        let vals: Vec<Option<i64>> = std_char.values.iter().map(|v| v.as_integer()).collect();
        assert!(vals.contains(&Some(2)));
        assert!(vals.contains(&Some(0)));
        assert!(vals.contains(&Some(-1)));
        t.verify_column_orthogonality().unwrap();
    }

    #[test]
    fn gl2_f3_table() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        assert_eq!(t.degrees(), vec![1, 1, 2, 2, 2, 3, 3, 4]);
        assert_eq!(t.degrees().iter().map(|d| d * d).sum::<i64>(), 48);
        t.verify_column_orthogonality().unwrap();

        // <chi, chi> = 1 and <regular, chi> = deg chi.
        let reg = ClassFunction::regular(Arc::clone(&t.classes));
        for chi in &t.irreducibles {
            assert_eq!(chi.inner_product(chi).unwrap(), 1);
            assert_eq!(reg.inner_product(chi).unwrap(), chi.degree());
        }

        // Permutation character of G/B: contains the trivial exactly once
        // (Burnside: B has 2 orbits on G/B, so <perm, perm> = 2).
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let b_pos = b.positions_in(&g).unwrap();
        let perm = permutation_character(&t.classes, &b_pos);
        assert_eq!(perm.degree(), 4);
        let trivial = &t.irreducibles[t.trivial_index()];
        assert_eq!(perm.inner_product(trivial).unwrap(), 1);
        assert_eq!(perm.inner_product(&perm).unwrap(), 2);
        // Nonnegative integer decomposition.
        let mults = t.decompose(&perm).unwrap();
        assert!(mults.iter().all(|&m| m >= 0));
        assert_eq!(t.character_from_multiplicities(&mults), perm);
    }

    #[test]
    fn induce_from_borel_and_reciprocity() {
        let g = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let t = character_table(Arc::clone(&g)).unwrap();
        let b = g.subgroup_where(|m| m.get(1, 0).is_zero()).unwrap();
        let b_pos = b.positions_in(&g).unwrap();
        let tb = character_table(Arc::clone(&b)).unwrap();

        // Induction of the trivial character of B = the permutation character.
        let triv_b = ClassFunction::trivial(Arc::clone(&tb.classes));
        let ind = induce(&triv_b, &b_pos, &t.classes);
        let perm = permutation_character(&t.classes, &b_pos);
        assert_eq!(ind, perm);

        // Frobenius reciprocity on all (sigma, tau) pairs.
        for sigma in &tb.irreducibles {
            let ind_sigma = induce(sigma, &b_pos, &t.classes);
            for tau in &t.irreducibles {
                let res_tau = restrict(tau, &b_pos, &tb.classes);
                assert_eq!(
                    ind_sigma.inner_product(tau).unwrap(),
                    sigma.inner_product(&res_tau).unwrap()
                );
            }
        }
    }

    #[test]
    fn inflation_preserves_irreducibility() {
        let g9 = FiniteGroup::generate(gl2_generators(9), 2, 9).unwrap();
        let g3 = FiniteGroup::generate(gl2_generators(3), 2, 3).unwrap();
        let red = GroupHom::reduction(Arc::clone(&g9), Arc::clone(&g3)).unwrap();
        let t3 = character_table(g3).unwrap();
        let c9 = ClassInfo::compute(g9);
        for chi in &t3.irreducibles {
            let lifted = inflate(chi, &red, &c9);
            assert_eq!(lifted.inner_product(&lifted).unwrap(), 1);
        }
    }
}
