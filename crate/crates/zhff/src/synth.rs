//! Matrix synthesis: from a dense tensor back to a diagram.
//!
//! The route goes through logic. A matrix is a Schur product of matrices
//! that are 1 everywhere except a single position; each of those is decided
//! by a propositional formula over field equations, the formula becomes a
//! polynomial that vanishes exactly where the formula holds, the polynomial
//! becomes a diagram by Horner evaluation, and the q-1 power map squeezes
//! the result to a 0/1 flag that a decorated point converts into the entry
//! value. Spiders glue the per-entry branches back together, and bending
//! the output block of wires turns the effect into the matrix itself.
//!
//! Everything here is tested against direct evaluation: polynomials against
//! term arithmetic, formulas against their truth tables, diagrams against
//! contraction.

use std::collections::BTreeMap;

use crate::diagram::{Diagram, DiagramError};
use crate::field::{FieldElement, FieldSpec};
use crate::scalar::Scalar;
use crate::tensor::ExactTensor;

/// Multivariate polynomial over the field with every exponent kept below q,
/// which is enough to represent any function on field points.
#[derive(Debug, Clone)]
pub struct MultiPoly {
    field: FieldSpec,
    n_vars: usize,
    terms: BTreeMap<Vec<u16>, FieldElement>,
}

impl MultiPoly {
    pub fn zero(field: &FieldSpec, n_vars: usize) -> MultiPoly {
        MultiPoly { field: field.clone(), n_vars, terms: BTreeMap::new() }
    }

    pub fn constant(field: &FieldSpec, n_vars: usize, c: &FieldElement) -> MultiPoly {
        let mut poly = MultiPoly::zero(field, n_vars);
        poly.accumulate(vec![0; n_vars], c.clone());
        poly
    }

    pub fn variable(field: &FieldSpec, n_vars: usize, index: usize) -> MultiPoly {
        assert!(index < n_vars, "variable index out of range");
        let mut exps = vec![0u16; n_vars];
        exps[index] = 1;
        let mut poly = MultiPoly::zero(field, n_vars);
        poly.accumulate(exps, field.one());
        poly
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u16>, FieldElement> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// x^q and x agree on every field point, so exponents fold into 1..q-1.
    fn fold_exp(&self, e: u16) -> u16 {
        let cycle = (self.field.q() - 1) as u16;
        if e == 0 {
            0
        } else {
            ((e - 1) % cycle) + 1
        }
    }

    fn accumulate(&mut self, exps: Vec<u16>, coeff: FieldElement) {
        if coeff.is_zero() {
            return;
        }
        let exps: Vec<u16> = exps.into_iter().map(|e| self.fold_exp(e)).collect();
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = self.field.add(o.get(), &coeff);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.accumulate(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> MultiPoly {
        let mut out = MultiPoly::zero(&self.field, self.n_vars);
        for (e, c) in &self.terms {
            out.accumulate(e.clone(), self.field.neg(c));
        }
        out
    }

    pub fn sub(&self, other: &MultiPoly) -> MultiPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = MultiPoly::zero(&self.field, self.n_vars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let exps: Vec<u16> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.accumulate(exps, self.field.mul(c1, c2));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut acc = MultiPoly::constant(&self.field, self.n_vars, &self.field.one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn eval(&self, point: &[FieldElement]) -> FieldElement {
        assert_eq!(point.len(), self.n_vars);
        let mut acc = self.field.zero();
        for (exps, coeff) in &self.terms {
            let mut term = coeff.clone();
            for (x, &e) in point.iter().zip(exps) {
                if e > 0 {
                    let p = self.field.pow(x, e as i64).expect("nonnegative exponent");
                    term = self.field.mul(&term, &p);
                }
            }
            acc = self.field.add(&acc, &term);
        }
        acc
    }

    /// Coefficients with respect to the last variable, constant term first.
    pub fn split_by_last(&self) -> Vec<MultiPoly> {
        assert!(self.n_vars > 0, "no variable to split by");
        let top = self
            .terms
            .keys()
            .map(|e| e[self.n_vars - 1])
            .max()
            .unwrap_or(0) as usize;
        let mut parts = vec![MultiPoly::zero(&self.field, self.n_vars - 1); top + 1];
        for (exps, coeff) in &self.terms {
            let k = exps[self.n_vars - 1] as usize;
            parts[k].accumulate(exps[..self.n_vars - 1].to_vec(), coeff.clone());
        }
        parts
    }
}

/// Propositional formula over field equations.
#[derive(Debug, Clone)]
pub enum Formula {
    Equal(MultiPoly, MultiPoly),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Direct truth evaluation; the polynomial encoding is tested against it.
    pub fn holds(&self, point: &[FieldElement]) -> bool {
        match self {
            Formula::Equal(f1, f2) => f1.eval(point) == f2.eval(point),
            Formula::Not(inner) => !inner.holds(point),
            Formula::Or(a, b) => a.holds(point) || b.holds(point),
        }
    }
}

/// A matrix that is 1 everywhere except where the formula fails, where it
/// carries the value instead.
#[derive(Debug, Clone)]
pub struct PseudoBinary {
    pub value: Scalar,
    pub formula: Formula,
    pub n_vars: usize,
}

/// True everywhere except at the given point.
pub fn position_formula(field: &FieldSpec, n_vars: usize, point: &[u64]) -> Formula {
    assert_eq!(point.len(), n_vars);
    let one = MultiPoly::constant(field, n_vars, &field.one());
    let zero = MultiPoly::zero(field, n_vars);
    let mut disjuncts = point.iter().enumerate().map(|(l, &c)| {
        Formula::Not(Box::new(Formula::Equal(
            MultiPoly::variable(field, n_vars, l),
            MultiPoly::constant(field, n_vars, &field.element_at(c)),
        )))
    });
    match disjuncts.next() {
        // nothing can differ from the empty point, so the formula is false
        None => Formula::Equal(one, zero),
        Some(first) => {
            disjuncts.fold(first, |acc, d| Formula::Or(Box::new(acc), Box::new(d)))
        }
    }
}

/// Polynomial that vanishes exactly where the formula holds.
pub fn formula_to_poly(field: &FieldSpec, formula: &Formula) -> MultiPoly {
    match formula {
        Formula::Equal(f1, f2) => f1.sub(f2),
        Formula::Not(inner) => {
            let g = formula_to_poly(field, inner);
            let one = MultiPoly::constant(field, g.n_vars(), &field.one());
            one.sub(&g.pow((field.q() - 1) as u32))
        }
        Formula::Or(a, b) => formula_to_poly(field, a).mul(&formula_to_poly(field, b)),
    }
}

/// One pseudo-binary matrix per entry different from 1; their Schur product
/// is the input matrix.
pub fn schur_decompose(matrix: &ExactTensor) -> Vec<PseudoBinary> {
    let field = matrix.field();
    let (p, t) = (field.p(), field.t() as u32);
    let one = Scalar::one(p, t);
    let q = field.q() as usize;
    let (n, m) = (matrix.n_in(), matrix.n_out());
    let n_vars = n + m;
    let mut out = Vec::new();
    for flat in 0..q.pow(n_vars as u32) {
        let mut digits = vec![0u64; n_vars];
        let mut rem = flat;
        for pos in (0..n_vars).rev() {
            digits[pos] = (rem % q) as u64;
            rem /= q;
        }
        let (outs, ins) = digits.split_at(m);
        let entry = matrix.get(outs, ins);
        if entry.equal(&one) {
            continue;
        }
        // variable order: inputs first, then outputs
        let point: Vec<u64> = ins.iter().chain(outs.iter()).copied().collect();
        out.push(PseudoBinary {
            value: entry.clone(),
            formula: position_formula(field, n_vars, &point),
            n_vars,
        });
    }
    out
}

/// Evaluate a polynomial diagrammatically: inputs carry the variables, the
/// output carries the value. Horner's scheme on the last variable.
pub fn poly_to_diagram(field: &FieldSpec, poly: &MultiPoly) -> Result<Diagram, DiagramError> {
    let n = poly.n_vars();
    if n == 0 {
        return Diagram::x_lollipop(field, &poly.eval(&[]));
    }
    let parts = poly.split_by_last();
    let top = parts.len() - 1;
    let subs = parts
        .iter()
        .map(|part| poly_to_diagram(field, part))
        .collect::<Result<Vec<_>, _>>()?;
    // fan every carried variable once per coefficient, the split variable
    // once per Horner multiplication
    let mut fans = Diagram::empty(field);
    for _ in 0..n - 1 {
        fans = fans.tensor(&Diagram::z_spider(field, top + 1, 1))?;
    }
    fans = fans.tensor(&Diagram::z_spider(field, top, 1))?;
    // interleave: coefficient blocks with one split-variable wire between
    let width = (n - 1) * (top + 1) + top;
    let mut perm = vec![0usize; width];
    for l in 0..n - 1 {
        for k in 0..=top {
            perm[l * (top + 1) + k] = k * n + l;
        }
    }
    for c in 0..top {
        perm[(n - 1) * (top + 1) + c] = c * n + (n - 1);
    }
    let mut staged = Diagram::empty(field);
    for sub in subs.iter().take(top) {
        staged = staged.tensor(sub)?.tensor(&Diagram::identity(field, 1))?;
    }
    staged = staged.tensor(&subs[top])?;
    let mut cur = fans.then(&Diagram::permutation(field, &perm)?)?.then(&staged)?;
    // fold from the top coefficient down: acc -> f_k + x * acc
    for _ in 0..top {
        let w = cur.n_outputs();
        cur = cur.then(&Diagram::identity(field, w - 2).tensor(&Diagram::mult2(field))?)?;
        let w = cur.n_outputs();
        cur = cur.then(&Diagram::identity(field, w - 2).tensor(&Diagram::add2(field))?)?;
    }
    Ok(cur)
}

/// The (q-1)-th power map on one wire: sends 0 to 0, anything else to 1.
pub fn indicator(field: &FieldSpec) -> Result<Diagram, DiagramError> {
    let e = (field.q() - 1) as usize;
    Diagram::z_spider(field, e, 1).then(&Diagram::mult_n(field, e))
}

/// Effect that weighs basis value 0 by 1 and value 1 by r.
pub fn phased_postselect(field: &FieldSpec, r: Scalar) -> Result<Diagram, DiagramError> {
    let mut d = Diagram::h_box_phased(field, 0, 1, r)?;
    d.mul_sqrtq(1);
    Ok(d)
}

/// The matrix of a pseudo-binary as an effect on its variable wires.
pub fn pseudo_binary_to_diagram(
    field: &FieldSpec,
    pb: &PseudoBinary,
) -> Result<Diagram, DiagramError> {
    let poly = formula_to_poly(field, &pb.formula);
    poly_to_diagram(field, &poly)?
        .then(&indicator(field)?)?
        .then(&phased_postselect(field, pb.value.clone())?)
}

/// Build a diagram whose contraction is the given matrix.
pub fn synthesize(matrix: &ExactTensor) -> Result<Diagram, DiagramError> {
    let field = matrix.field().clone();
    let (n, m) = (matrix.n_in(), matrix.n_out());
    let wires = n + m;
    let pbs = schur_decompose(matrix);
    let k = pbs.len();
    let mut fans = Diagram::empty(&field);
    for _ in 0..wires {
        fans = fans.tensor(&Diagram::z_spider(&field, k, 1))?;
    }
    let mut effect = fans;
    if k > 0 {
        let mut perm = vec![0usize; wires * k];
        for v in 0..wires {
            for c in 0..k {
                perm[v * k + c] = c * wires + v;
            }
        }
        effect = effect.then(&Diagram::permutation(&field, &perm)?)?;
        let mut branches = Diagram::empty(&field);
        for pb in &pbs {
            branches = branches.tensor(&pseudo_binary_to_diagram(&field, pb)?)?;
        }
        effect = effect.then(&branches)?;
    }
    // Choi-Jamiolkowski: the output block of variables becomes real outputs
    effect.bend_inputs_to_outputs(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::tensor::{contract, equal_diagrams};
    use rand::{Rng, SeedableRng};

    fn gf(q: u64) -> FieldSpec {
        FieldSpec::of_order(q).unwrap()
    }

    fn all_points(field: &FieldSpec, n: usize) -> Vec<Vec<FieldElement>> {
        let q = field.q() as usize;
        (0..q.pow(n as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut point = vec![field.zero(); n];
                for pos in (0..n).rev() {
                    point[pos] = field.element_at((rem % q) as u64);
                    rem /= q;
                }
                point
            })
            .collect()
    }

    #[test]
    fn poly_arithmetic_agrees_with_field() {
        for q in [2u64, 3, 4] {
            let f = gf(q);
            let x = MultiPoly::variable(&f, 2, 0);
            let y = MultiPoly::variable(&f, 2, 1);
            let c = MultiPoly::constant(&f, 2, &f.element_at(q - 1));
            let poly = x.mul(&y).add(&c).sub(&y.pow(2));
            for point in all_points(&f, 2) {
                let direct = f.sub(
                    &f.add(&f.mul(&point[0], &point[1]), &f.element_at(q - 1)),
                    &f.mul(&point[1], &point[1]),
                );
                assert_eq!(poly.eval(&point), direct, "q={q}");
            }
        }
    }

    #[test]
    fn high_powers_fold_onto_low_ones() {
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            let x = MultiPoly::variable(&f, 1, 0);
            let folded = x.pow(q as u32);
            assert_eq!(folded.terms(), x.terms(), "x^q should store as x at q={q}");
            for e in 1..=(2 * q as u32) {
                let p = x.pow(e);
                for exps in p.terms().keys() {
                    assert!(exps[0] < q as u16, "exponent grew past q-1");
                }
                for point in all_points(&f, 1) {
                    assert_eq!(p.eval(&point), f.pow(&point[0], e as i64).unwrap());
                }
            }
        }
    }

    #[test]
    fn formula_polynomials_vanish_exactly_on_truth() {
        for q in [2u64, 3, 4] {
            let f = gf(q);
            let x = MultiPoly::variable(&f, 2, 0);
            let y = MultiPoly::variable(&f, 2, 1);
            let one = MultiPoly::constant(&f, 2, &f.one());
            let formulas = [
                Formula::Equal(x.clone(), y.clone()),
                Formula::Not(Box::new(Formula::Equal(x.mul(&y), one.clone()))),
                Formula::Or(
                    Box::new(Formula::Equal(x.clone(), one.clone())),
                    Box::new(Formula::Not(Box::new(Formula::Equal(y.clone(), x.pow(2))))),
                ),
            ];
            for formula in &formulas {
                let poly = formula_to_poly(&f, formula);
                for point in all_points(&f, 2) {
                    assert_eq!(
                        poly.eval(&point).is_zero(),
                        formula.holds(&point),
                        "encoding mismatch at q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn position_formula_singles_out_its_point() {
        let f = gf(3);
        let target = [2u64, 0];
        let formula = position_formula(&f, 2, &target);
        for point in all_points(&f, 2) {
            let is_target =
                point[0] == f.element_at(2) && point[1] == f.element_at(0);
            assert_eq!(formula.holds(&point), !is_target);
        }
        // no variables: the formula is plain false
        assert!(!position_formula(&f, 0, &[]).holds(&[]));
    }

    #[test]
    fn polynomial_diagrams_evaluate_pointwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for q in [2u64, 3, 4] {
            let f = gf(q);
            let mut polys = vec![
                MultiPoly::zero(&f, 0),
                MultiPoly::constant(&f, 1, &f.element_at(q - 1)),
                MultiPoly::variable(&f, 1, 0).pow(2),
                MultiPoly::variable(&f, 2, 0)
                    .mul(&MultiPoly::variable(&f, 2, 1))
                    .add(&MultiPoly::constant(&f, 2, &f.one())),
            ];
            for _ in 0..4 {
                // random dense polynomial in 2 variables
                let mut p = MultiPoly::zero(&f, 2);
                for _ in 0..5 {
                    let mono = MultiPoly::variable(&f, 2, 0)
                        .pow(rng.gen_range(0..q as u32))
                        .mul(&MultiPoly::variable(&f, 2, 1).pow(rng.gen_range(0..q as u32)))
                        .mul(&MultiPoly::constant(
                            &f,
                            2,
                            &f.element_at(rng.gen_range(0..q)),
                        ));
                    p = p.add(&mono);
                }
                polys.push(p);
            }
            for poly in &polys {
                let d = poly_to_diagram(&f, poly).unwrap();
                assert_eq!(d.n_inputs(), poly.n_vars());
                assert_eq!(d.n_outputs(), 1);
                let tensor = contract(&d);
                let one = Scalar::one(f.p(), f.t() as u32);
                let zero = Scalar::zero(f.p(), f.t() as u32);
                for point in all_points(&f, poly.n_vars()) {
                    let ins: Vec<u64> = point.iter().map(|x| f.index_of(x)).collect();
                    let want = f.index_of(&poly.eval(&point));
                    for (o, v) in tensor.column(&ins).iter().enumerate() {
                        let expect = if o as u64 == want { &one } else { &zero };
                        assert!(v.equal(expect), "wrong value diagram at q={q}");
                    }
                }
            }
        }
    }

    #[test]
    fn indicator_flattens_to_a_flag() {
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            let t = contract(&indicator(&f).unwrap());
            let one = Scalar::one(f.p(), f.t() as u32);
            let zero = Scalar::zero(f.p(), f.t() as u32);
            for i in 0..q {
                let want = f.index_of(&f.pow(&f.element_at(i), (q - 1) as i64).unwrap());
                assert!(want == u64::from(i != 0), "power map is the flag map");
                for (o, v) in t.column(&[i]).iter().enumerate() {
                    let expect = if o as u64 == want { &one } else { &zero };
                    assert!(v.equal(expect), "q={q}");
                }
            }
        }
    }

    #[test]
    fn postselect_weighs_one_against_r() {
        for q in [2u64, 3, 4] {
            let f = gf(q);
            let (p, t) = (f.p(), f.t() as u32);
            let r = Scalar::omega_pow(p, t, 1).add(&Scalar::one(p, t));
            let eff = contract(&phased_postselect(&f, r.clone()).unwrap());
            for j in 0..q {
                let e = f.bilinear(&f.one(), &f.element_at(j));
                let want = r.pow_residue(e);
                assert!(eff.get(&[], &[j]).equal(&want), "q={q}, j={j}");
            }
            assert!(eff.get(&[], &[0]).is_one());
            assert!(eff.get(&[], &[1]).equal(&r));
        }
    }

    #[test]
    fn pseudo_binary_diagram_hits_one_entry() {
        for q in [2u64, 3] {
            let f = gf(q);
            let (p, t) = (f.p(), f.t() as u32);
            let r = Scalar::omega_pow(p, t, 1);
            let point = [1u64, 0];
            let pb = PseudoBinary {
                value: r.clone(),
                formula: position_formula(&f, 2, &point),
                n_vars: 2,
            };
            let eff = contract(&pseudo_binary_to_diagram(&f, &pb).unwrap());
            for x in 0..q {
                for y in 0..q {
                    let got = eff.get(&[], &[x, y]);
                    if [x, y] == point {
                        assert!(got.equal(&r), "q={q}");
                    } else {
                        assert!(got.is_one(), "q={q}");
                    }
                }
            }
        }
    }

    #[test]
    fn synthesized_diagrams_contract_back() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for q in [2u64, 3] {
            let f = gf(q);
            let (p, t) = (f.p(), f.t() as u32);
            let menu = [
                Scalar::zero(p, t),
                Scalar::one(p, t),
                Scalar::one(p, t).neg(),
                Scalar::omega_pow(p, t, 1),
            ];
            for (m_out, n_in) in [(1usize, 0usize), (1, 1), (2, 1)] {
                for _ in 0..3 {
                    let matrix = ExactTensor::from_fn(&f, m_out, n_in, |_, _| {
                        menu[rng.gen_range(0..menu.len())].clone()
                    });
                    let d = synthesize(&matrix).unwrap();
                    assert_eq!(d.n_inputs(), n_in);
                    assert_eq!(d.n_outputs(), m_out);
                    assert!(
                        contract(&d).equal(&matrix),
                        "round trip failed at q={q} shape ({m_out},{n_in})"
                    );
                }
            }
        }
    }

    #[test]
    fn all_ones_needs_no_branches() {
        let f = gf(3);
        let one = Scalar::one(3, 1);
        let matrix = ExactTensor::from_fn(&f, 1, 1, |_, _| one.clone());
        assert!(schur_decompose(&matrix).is_empty());
        let d = synthesize(&matrix).unwrap();
        assert!(contract(&d).equal(&matrix));
        // and the identity is not all ones, so it does need branches
        let id = ExactTensor::identity(&f, 1);
        assert_eq!(schur_decompose(&id).len(), 6);
        let d = synthesize(&id).unwrap();
        assert!(equal_diagrams(&d, &Diagram::identity(&f, 1)).unwrap());
    }
}
