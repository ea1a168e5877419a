//! Quantum polynomial interpolation, simulated exactly.
//!
//! The pipeline recovers a hidden degree-d polynomial over the field with
//! d-1 classical queries plus one quantum query. The classical stage divides
//! out the node polynomial of the queried points; the quantum stage feeds a
//! uniform superposition through the oracle for the remaining linear part,
//! conjugates by Fourier boxes, and measures. Amplitudes are carried in the
//! exact scalar ring, and outcome probabilities are extracted as exact
//! rationals; floats appear only in the Monte-Carlo sampler.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError};
use crate::field::{FieldElement, FieldError, FieldSpec};
use crate::scalar::Scalar;
use crate::tensor::{contract, ExactTensor, TensorError};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("degree {d} reduction needs more than {got} field points")]
    NotEnoughPoints { d: usize, got: u64 },
    #[error("oracle is undefined at {0}")]
    UndefinedAt(String),
    #[error("slope of a linear polynomial must be nonzero")]
    ZeroSlope,
    #[error("residual of the reduction is not linear")]
    NotLinear,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

// ---- univariate polynomials ----

/// Coefficients stored low degree first, with no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    field: FieldSpec,
    coeffs: Vec<FieldElement>,
}

impl Poly {
    pub fn zero(field: &FieldSpec) -> Poly {
        Poly { field: field.clone(), coeffs: Vec::new() }
    }

    pub fn from_coeffs(field: &FieldSpec, mut coeffs: Vec<FieldElement>) -> Poly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { field: field.clone(), coeffs }
    }

    pub fn constant(field: &FieldSpec, c: FieldElement) -> Poly {
        Poly::from_coeffs(field, vec![c])
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    /// Coefficient of x^k, zero-padded past the degree.
    pub fn coeff(&self, k: usize) -> FieldElement {
        self.coeffs.get(k).cloned().unwrap_or_else(|| self.field.zero())
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: &FieldElement) -> FieldElement {
        let mut acc = self.field.zero();
        for c in self.coeffs.iter().rev() {
            acc = self.field.add(&self.field.mul(&acc, x), c);
        }
        acc
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.field.add(&self.coeff(k), &other.coeff(k)))
            .collect();
        Poly::from_coeffs(&self.field, coeffs)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.field.sub(&self.coeff(k), &other.coeff(k)))
            .collect();
        Poly::from_coeffs(&self.field, coeffs)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero(&self.field);
        }
        let mut coeffs = vec![self.field.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = self.field.add(&coeffs[i + j], &self.field.mul(a, b));
            }
        }
        Poly::from_coeffs(&self.field, coeffs)
    }

    /// Long division: self = quotient * divisor + remainder.
    pub fn divmod(&self, divisor: &Poly) -> Result<(Poly, Poly), InterpError> {
        let dd = divisor.degree().ok_or(FieldError::DivisionByZero)?;
        let lead_inv = self.field.inv(&divisor.coeffs[dd])?;
        let mut rem = self.coeffs.clone();
        if rem.len() < dd + 1 {
            return Ok((Poly::zero(&self.field), self.clone()));
        }
        let mut quot = vec![self.field.zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = self.field.mul(&rem[k + dd], &lead_inv);
            if c.is_zero() {
                continue;
            }
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] = self.field.sub(&rem[k + j], &self.field.mul(&c, d));
            }
            quot[k] = c;
        }
        Ok((
            Poly::from_coeffs(&self.field, quot),
            Poly::from_coeffs(&self.field, rem),
        ))
    }

    /// Lagrange interpolation through points with distinct first components.
    pub fn interpolate(
        field: &FieldSpec,
        points: &[(FieldElement, FieldElement)],
    ) -> Result<Poly, InterpError> {
        let mut acc = Poly::zero(field);
        for (i, (xi, yi)) in points.iter().enumerate() {
            let mut basis = Poly::constant(field, yi.clone());
            for (j, (xj, _)) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let denom = field.inv(&field.sub(xi, xj))?;
                // (x - xj) / (xi - xj)
                basis = basis.mul(&Poly::from_coeffs(
                    field,
                    vec![field.mul(&field.neg(xj), &denom), denom.clone()],
                ));
            }
            acc = acc.add(&basis);
        }
        Ok(acc)
    }
}

// ---- oracles ----

/// A black-box function on field points that bills every call.
#[derive(Clone)]
pub struct OracleBox {
    eval: Arc<dyn Fn(&FieldElement) -> Option<FieldElement> + Send + Sync>,
    queries: Arc<AtomicU64>,
    degree_claim: usize,
}

impl std::fmt::Debug for OracleBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleBox")
            .field("degree_claim", &self.degree_claim)
            .field("queries", &self.query_count())
            .finish()
    }
}

impl OracleBox {
    pub fn new(
        degree_claim: usize,
        eval: impl Fn(&FieldElement) -> Option<FieldElement> + Send + Sync + 'static,
    ) -> OracleBox {
        OracleBox {
            eval: Arc::new(eval),
            queries: Arc::new(AtomicU64::new(0)),
            degree_claim,
        }
    }

    /// Wrap a polynomial given by its coefficient list, low degree first.
    /// The degree claim is taken from the list length, not the content.
    pub fn from_coeffs(field: &FieldSpec, coeffs: &[FieldElement]) -> OracleBox {
        let poly = Poly {
            field: field.clone(),
            coeffs: coeffs.to_vec(),
        };
        OracleBox::new(coeffs.len().saturating_sub(1), move |x| Some(poly.eval(x)))
    }

    /// Evaluate at a point. The counter moves even when the call fails.
    pub fn query(&self, x: &FieldElement) -> Result<FieldElement, InterpError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        (self.eval)(x).ok_or_else(|| InterpError::UndefinedAt(x.to_string()))
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn degree_claim(&self) -> usize {
        self.degree_claim
    }
}

/// f(x) = ax + b with invertible slope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearPoly {
    a: FieldElement,
    b: FieldElement,
}

impl LinearPoly {
    pub fn new(field: &FieldSpec, a: FieldElement, b: FieldElement) -> Result<LinearPoly, InterpError> {
        field.check(&a)?;
        field.check(&b)?;
        if a.is_zero() {
            return Err(InterpError::ZeroSlope);
        }
        Ok(LinearPoly { a, b })
    }

    pub fn a(&self) -> &FieldElement {
        &self.a
    }

    pub fn b(&self) -> &FieldElement {
        &self.b
    }

    pub fn eval(&self, field: &FieldSpec, x: &FieldElement) -> FieldElement {
        field.add(&field.mul(&self.a, x), &self.b)
    }

    pub fn neg(&self, field: &FieldSpec) -> LinearPoly {
        LinearPoly { a: field.neg(&self.a), b: field.neg(&self.b) }
    }
}

// ---- classical degree reduction ----

/// Output of the classical stage: a degree-1 oracle and the data needed to
/// undo the reduction.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Quotient oracle; each query spends one query on the wrapped box.
    pub h: OracleBox,
    /// Node polynomial of the sample points.
    pub modulus: Poly,
    /// Interpolant of the sampled values.
    pub remainder: Poly,
    pub points: Vec<FieldElement>,
}

/// Trade d-1 classical queries for a drop to degree 1: sample g away from
/// zero, interpolate the samples, and divide out the node polynomial.
pub fn classical_reduce(field: &FieldSpec, g: &OracleBox) -> Result<Reduction, InterpError> {
    let d = g.degree_claim();
    assert!(d >= 1, "nothing to reduce below degree 1");
    if field.q() <= (d - 1) as u64 {
        return Err(InterpError::NotEnoughPoints { d, got: field.q() });
    }
    let points: Vec<FieldElement> = (1..d as u64).map(|i| field.element_at(i)).collect();
    let mut samples = Vec::with_capacity(points.len());
    for x in &points {
        samples.push((x.clone(), g.query(x)?));
    }
    let remainder = Poly::interpolate(field, &samples)?;
    let modulus = points.iter().fold(
        Poly::constant(field, field.one()),
        |acc, xi| acc.mul(&Poly::from_coeffs(field, vec![field.neg(xi), field.one()])),
    );
    let (f2, g2) = (field.clone(), g.clone());
    let (n2, r2) = (modulus.clone(), remainder.clone());
    let h = OracleBox::new(1, move |x| {
        let nx = n2.eval(x);
        if nx.is_zero() {
            // a sample point: the quotient is 0/0 here
            return None;
        }
        let gx = g2.query(x).ok()?;
        let num = f2.sub(&gx, &r2.eval(x));
        Some(f2.mul(&num, &f2.inv(&nx).expect("nonzero checked")))
    });
    Ok(Reduction { h, modulus, remainder, points })
}

/// The linear quotient of a fully known polynomial: (g - r) / N. This is the
/// circuit the quantum oracle implements; it uses no queries.
pub fn linear_part(
    field: &FieldSpec,
    g: &Poly,
    modulus: &Poly,
    remainder: &Poly,
) -> Result<LinearPoly, InterpError> {
    let (h, tail) = g.sub(remainder).divmod(modulus)?;
    if !tail.is_zero() || h.degree() != Some(1) {
        return Err(InterpError::NotLinear);
    }
    LinearPoly::new(field, h.coeff(1), h.coeff(0))
}

/// Undo the reduction: g = (ax + b) * N + r.
pub fn reconstruct(field: &FieldSpec, f: &LinearPoly, modulus: &Poly, remainder: &Poly) -> Poly {
    Poly::from_coeffs(field, vec![f.b.clone(), f.a.clone()])
        .mul(modulus)
        .add(remainder)
}

// ---- the quantum stage ----

/// Joint state of the two q-level registers, amplitudes indexed x, then y.
#[derive(Debug, Clone)]
pub struct TwoRegisterState {
    field: FieldSpec,
    amps: Vec<Scalar>,
}

impl TwoRegisterState {
    /// Uniform superposition on the first register, basis 0 on the second.
    pub fn initial(field: &FieldSpec) -> TwoRegisterState {
        let q = field.q();
        let (p, t) = (field.p(), field.t() as u32);
        let amp = Scalar::sqrtq_pow(p, t, -1);
        let mut amps = vec![Scalar::zero(p, t); (q * q) as usize];
        for x in 0..q {
            amps[(x * q) as usize] = amp.clone();
        }
        TwoRegisterState { field: field.clone(), amps }
    }

    pub fn amp(&self, x: u64, y: u64) -> &Scalar {
        &self.amps[(x * self.field.q() + y) as usize]
    }

    pub fn amps(&self) -> &[Scalar] {
        &self.amps
    }

    /// Apply a two-register matrix (2 inputs, 2 outputs).
    pub fn apply(&self, m: &ExactTensor) -> Result<TwoRegisterState, InterpError> {
        if m.n_in() != 2 || m.n_out() != 2 {
            return Err(TensorError::ArityMismatch { expected: 2, got: m.n_in().max(m.n_out()) }.into());
        }
        let q = self.field.q();
        let (p, t) = (self.field.p(), self.field.t() as u32);
        let mut amps = vec![Scalar::zero(p, t); self.amps.len()];
        for xo in 0..q {
            for yo in 0..q {
                let mut acc = Scalar::zero(p, t);
                for xi in 0..q {
                    for yi in 0..q {
                        let a = self.amp(xi, yi);
                        if a.is_zero() {
                            continue;
                        }
                        acc = acc.add(&m.get(&[xo, yo], &[xi, yi]).mul(a));
                    }
                }
                amps[(xo * q + yo) as usize] = acc;
            }
        }
        Ok(TwoRegisterState { field: self.field.clone(), amps })
    }

    /// Keep only amplitudes whose second register value passes the filter.
    pub fn filter_second(&self, keep: impl Fn(u64) -> bool) -> TwoRegisterState {
        let q = self.field.q();
        let (p, t) = (self.field.p(), self.field.t() as u32);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if keep(i as u64 % q) { a.clone() } else { Scalar::zero(p, t) })
            .collect();
        TwoRegisterState { field: self.field.clone(), amps }
    }

    /// Exact squared norm. The algorithm only ever produces states whose
    /// squared norms are rational, so failure to convert is a bug.
    pub fn norm_sq(&self) -> BigRational {
        let (p, t) = (self.field.p(), self.field.t() as u32);
        let total = self
            .amps
            .iter()
            .fold(Scalar::zero(p, t), |acc, a| acc.add(&a.norm_sq()));
        total.to_rational().expect("squared norm should be rational")
    }
}

/// The query map |x, y> -> |x, y + f(x)> as an exact two-register matrix.
pub fn oracle_unitary(field: &FieldSpec, f: &LinearPoly) -> ExactTensor {
    let (p, t) = (field.p(), field.t() as u32);
    let (one, zero) = (Scalar::one(p, t), Scalar::zero(p, t));
    ExactTensor::from_fn(field, 2, 2, |outs, ins| {
        let (x, y) = (field.element_at(ins[0]), field.element_at(ins[1]));
        let fx = field.add(&y, &f.eval(field, &x));
        if outs[0] == ins[0] && outs[1] == field.index_of(&fx) {
            one.clone()
        } else {
            zero.clone()
        }
    })
}

/// First-register block of the controlled unitary for second-register value
/// y: the identity at y = 0, otherwise the inverse Fourier box followed by
/// the inverse of the transposed-selector map for y.
pub fn u_block(field: &FieldSpec, y: &FieldElement) -> Result<ExactTensor, InterpError> {
    if y.is_zero() {
        return Ok(ExactTensor::identity(field, 1));
    }
    let selector = contract(&Diagram::trans_mult_of(field, y)?);
    let hdg = contract(&Diagram::h_dagger(field, 1, 1));
    Ok(selector.dagger().matmul(&hdg)?)
}

/// The controlled unitary, block diagonal over the second register.
pub fn build_u(field: &FieldSpec) -> Result<ExactTensor, InterpError> {
    let q = field.q();
    let (p, t) = (field.p(), field.t() as u32);
    let blocks = (0..q)
        .map(|y| u_block(field, &field.element_at(y)))
        .collect::<Result<Vec<_>, _>>()?;
    let zero = Scalar::zero(p, t);
    Ok(ExactTensor::from_fn(field, 2, 2, |outs, ins| {
        if outs[1] != ins[1] {
            zero.clone()
        } else {
            blocks[ins[1] as usize].get(&[outs[0]], &[ins[0]]).clone()
        }
    }))
}

/// Exact outcome statistics of one run.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    /// Probability that the flag measurement forces a restart.
    pub p_abort: BigRational,
    /// Joint law of (first output, second output) given no abort, indexed
    /// by basis position; zero-probability pairs are omitted.
    pub joint: BTreeMap<(u64, u64), BigRational>,
}

impl OutcomeDistribution {
    pub fn p_first(&self, x: u64) -> BigRational {
        self.joint
            .iter()
            .filter(|((a, _), _)| *a == x)
            .map(|(_, p)| p.clone())
            .sum()
    }

    pub fn p_second(&self, z: u64) -> BigRational {
        self.joint
            .iter()
            .filter(|((_, b), _)| *b == z)
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// The conditional law must be an exact probability distribution.
    pub fn is_consistent(&self) -> bool {
        let total: BigRational = self.joint.values().cloned().sum();
        let one = BigRational::one();
        total == one
            && self.p_abort >= BigRational::zero()
            && self.p_abort <= one
            && self.joint.values().all(|p| *p > BigRational::zero())
    }
}

/// Intermediate states and statistics of the quantum stage.
#[derive(Debug, Clone)]
pub struct InterpRun {
    pub psi1: TwoRegisterState,
    pub psi2: TwoRegisterState,
    pub distribution: OutcomeDistribution,
    /// The stage makes exactly one oracle call, in superposition.
    pub quantum_queries: u64,
}

/// Simulate the single-quantum-query stage for f(x) = ax + b.
pub fn run_interpolation(field: &FieldSpec, f: &LinearPoly) -> Result<InterpRun, InterpError> {
    let psi1 = TwoRegisterState::initial(field).apply(&oracle_unitary(field, f))?;
    let fourier = ExactTensor::identity(field, 1)
        .kron(&contract(&Diagram::h_box(field, 1, 1)))?;
    let psi2 = psi1.apply(&fourier)?.apply(&build_u(field)?)?;
    // flag measurement on the second register: 0 aborts
    let p_abort = psi2.filter_second(|y| y == 0).norm_sq();
    let kept = psi2.filter_second(|y| y != 0);
    let unfourier = ExactTensor::identity(field, 1)
        .kron(&contract(&Diagram::h_dagger(field, 1, 1)))?;
    let read = kept.apply(&unfourier)?;
    let total = read.norm_sq();
    let q = field.q();
    let mut joint = BTreeMap::new();
    for x in 0..q {
        for z in 0..q {
            let w = read.amp(x, z).norm_sq();
            if w.is_zero() {
                continue;
            }
            let w = w.to_rational().expect("squared amplitude should be rational");
            joint.insert((x, z), w / total.clone());
        }
    }
    Ok(InterpRun {
        psi1,
        psi2,
        distribution: OutcomeDistribution { p_abort, joint },
        quantum_queries: 1,
    })
}

// ---- the full pipeline ----

/// End-to-end account of one interpolation of a hidden polynomial.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub reduction: Reduction,
    pub linear: LinearPoly,
    pub distribution: OutcomeDistribution,
    pub classical_queries: u64,
    pub quantum_queries: u64,
    /// Coefficients recovered from the most likely outcome, low degree
    /// first; equals the hidden polynomial whenever the run reads b.
    pub recovered: Poly,
}

/// Reduce, run the quantum stage, and reconstruct from the modal outcome.
pub fn interpolate_pipeline(
    field: &FieldSpec,
    hidden: &[FieldElement],
) -> Result<PipelineResult, InterpError> {
    let g = OracleBox::from_coeffs(field, hidden);
    let reduction = classical_reduce(field, &g)?;
    let classical_queries = g.query_count();
    let linear = linear_part(
        field,
        &Poly::from_coeffs(field, hidden.to_vec()),
        &reduction.modulus,
        &reduction.remainder,
    )?;
    let run = run_interpolation(field, &linear)?;
    let ((x, z), _) = run
        .distribution
        .joint
        .iter()
        .max_by(|(_, p1), (_, p2)| p1.cmp(p2))
        .expect("kept branch is never empty");
    let modal = LinearPoly::new(field, field.element_at(*x), field.element_at(*z))?;
    let recovered = reconstruct(field, &modal, &reduction.modulus, &reduction.remainder);
    Ok(PipelineResult {
        reduction,
        linear,
        distribution: run.distribution,
        classical_queries,
        quantum_queries: run.quantum_queries,
        recovered,
    })
}

// ---- sampling ----

/// Empirical counts from repeated draws of the exact distribution.
#[derive(Debug, Clone, Default)]
pub struct RunCounts {
    pub aborts: u64,
    pub keeps: u64,
    pub first_counts: BTreeMap<u64, u64>,
    pub second_counts: BTreeMap<u64, u64>,
}

/// Monte-Carlo over the exact law; deterministic for a fixed seed.
pub fn sample_runs(
    field: &FieldSpec,
    f: &LinearPoly,
    n_runs: u64,
    seed: u64,
) -> Result<RunCounts, InterpError> {
    assert!(n_runs >= 1, "sampling needs at least one run");
    let dist = run_interpolation(field, f)?.distribution;
    let p_abort = dist.p_abort.to_f64().expect("probability fits in a float");
    let outcomes: Vec<((u64, u64), f64)> = dist
        .joint
        .iter()
        .map(|(k, p)| (*k, p.to_f64().expect("probability fits in a float")))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = RunCounts::default();
    for _ in 0..n_runs {
        if rng.gen::<f64>() < p_abort {
            counts.aborts += 1;
            continue;
        }
        counts.keeps += 1;
        let mut u = rng.gen::<f64>();
        let mut picked = outcomes.last().expect("kept branch is never empty").0;
        for (key, w) in &outcomes {
            if u < *w {
                picked = *key;
                break;
            }
            u -= w;
        }
        *counts.first_counts.entry(picked.0).or_insert(0) += 1;
        *counts.second_counts.entry(picked.1).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn gf(q: u64) -> FieldSpec {
        FieldSpec::of_order(q).unwrap()
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn polynomial_division_is_exact() {
        let f = gf(5);
        let e = |i: u64| f.element_at(i);
        // (2x^2 + x + 3) divided by (x - 1)
        let g = Poly::from_coeffs(&f, vec![e(3), e(1), e(2)]);
        let n = Poly::from_coeffs(&f, vec![f.neg(&e(1)), e(1)]);
        let (quot, rem) = g.divmod(&n).unwrap();
        assert_eq!(quot.degree(), Some(1));
        assert_eq!(rem.degree(), Some(0));
        assert_eq!(quot.mul(&n).add(&rem), g);
        // remainder at the root matches evaluation
        assert_eq!(rem.eval(&e(1)), g.eval(&e(1)));
        // division by zero is refused
        assert!(g.divmod(&Poly::zero(&f)).is_err());
    }

    #[test]
    fn lagrange_interpolant_hits_its_points() {
        for q in [4u64, 5, 7] {
            let f = gf(q);
            let points: Vec<(FieldElement, FieldElement)> = (0..3)
                .map(|i| (f.element_at(i), f.element_at((i * i + 1) % q)))
                .collect();
            let r = Poly::interpolate(&f, &points).unwrap();
            assert!(r.degree().unwrap_or(0) <= 2);
            for (x, y) in &points {
                assert_eq!(r.eval(x), *y, "q={q}");
            }
        }
    }

    #[test]
    fn reduction_spends_exactly_its_budget() {
        // degree 1: untouched pass-through
        let f = gf(5);
        let e = |i: u64| f.element_at(i);
        let g = OracleBox::from_coeffs(&f, &[e(3), e(2)]);
        let red = classical_reduce(&f, &g).unwrap();
        assert_eq!(g.query_count(), 0);
        assert!(red.modulus.degree() == Some(0) && red.remainder.is_zero());
        assert_eq!(red.h.query(&e(4)).unwrap(), g.query(&e(4)).unwrap());

        // degree 2 over F5: one query, at the point 1
        let g = OracleBox::from_coeffs(&f, &[e(3), e(1), e(2)]);
        let red = classical_reduce(&f, &g).unwrap();
        assert_eq!(g.query_count(), 1);
        assert_eq!(red.points, vec![e(1)]);
        // h is the exact quotient: g = h * N + r away from the sample points
        for x in 0..5 {
            let x = e(x);
            if red.modulus.eval(&x).is_zero() {
                assert!(matches!(red.h.query(&x), Err(InterpError::UndefinedAt(_))));
                assert_eq!(red.remainder.eval(&x), g.query(&x).unwrap());
            } else {
                let hx = red.h.query(&x).unwrap();
                let rhs = f.add(
                    &f.mul(&hx, &red.modulus.eval(&x)),
                    &red.remainder.eval(&x),
                );
                assert_eq!(rhs, g.query(&x).unwrap());
            }
        }
    }

    #[test]
    fn cubic_reduction_over_gf4() {
        let f = gf(4);
        let e = |i: u64| f.element_at(i);
        // x^3 has claim 3: two queries
        let coeffs = [e(0), e(0), e(0), e(1)];
        let g = OracleBox::from_coeffs(&f, &coeffs);
        let red = classical_reduce(&f, &g).unwrap();
        assert_eq!(g.query_count(), 2);
        assert_eq!(red.points.len(), 2);
        assert_eq!(red.modulus.degree(), Some(2));
        // reconstruction matches on every field point
        let lin = linear_part(&f, &Poly::from_coeffs(&f, coeffs.to_vec()), &red.modulus, &red.remainder)
            .unwrap();
        let rebuilt = reconstruct(&f, &lin, &red.modulus, &red.remainder);
        for x in f.enumerate() {
            assert_eq!(rebuilt.eval(&x), f.pow(&x, 3).unwrap());
        }
        assert_eq!(rebuilt.coeffs(), &coeffs[..]);
        // not enough points: a degree-5 claim over F4 would need 4 distinct
        // nonzero sample points and headroom for the quotient
        let too_big = OracleBox::from_coeffs(&f, &[e(0), e(0), e(0), e(0), e(0), e(1)]);
        assert!(matches!(
            classical_reduce(&f, &too_big),
            Err(InterpError::NotEnoughPoints { .. })
        ));
    }

    #[test]
    fn oracle_is_the_expected_permutation() {
        let f4 = gf(4);
        // kappa is the element at index p, its successor at p + 1
        let kappa = f4.element_at(2);
        let lin = LinearPoly::new(&f4, kappa.clone(), f4.one()).unwrap();
        let o = oracle_unitary(&f4, &lin);
        // (1, 0) lands on (1, kappa + 1)
        let target = f4.index_of(&f4.add(&kappa, &f4.one()));
        assert!(o.get(&[1, target], &[1, 0]).is_one());
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            for a in 1..q {
                for b in 0..q {
                    let lin = LinearPoly::new(&f, f.element_at(a), f.element_at(b)).unwrap();
                    let o = oracle_unitary(&f, &lin);
                    // column sums certify a permutation matrix
                    for x in 0..q {
                        for y in 0..q {
                            let col = o.column(&[x, y]);
                            assert_eq!(
                                col.iter().filter(|s| s.is_one()).count(),
                                1,
                                "q={q}"
                            );
                            assert!(col.iter().all(|s| s.is_zero() || s.is_one()));
                        }
                    }
                    // f then -f composes to the identity
                    let back = oracle_unitary(&f, &lin.neg(&f));
                    assert!(back
                        .matmul(&o)
                        .unwrap()
                        .equal(&ExactTensor::identity(&f, 2)));
                }
            }
        }
    }

    #[test]
    fn controlled_unitary_is_unitary() {
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            let u = build_u(&f).unwrap();
            assert!(
                u.dagger().matmul(&u).unwrap().equal(&ExactTensor::identity(&f, 2)),
                "U is an exact unitary at q={q}"
            );
            // the zero block is an identity, the others are unitary on their own
            let id = ExactTensor::identity(&f, 1);
            assert!(u_block(&f, &f.zero()).unwrap().equal(&id));
            for y in 1..q {
                let block = u_block(&f, &f.element_at(y)).unwrap();
                assert!(block.dagger().matmul(&block).unwrap().equal(&id), "q={q}, y={y}");
            }
        }
    }

    #[test]
    fn intermediate_states_stay_normalized() {
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            let lin = LinearPoly::new(&f, f.one(), f.element_at(q - 1)).unwrap();
            let run = run_interpolation(&f, &lin).unwrap();
            let one = BigRational::one();
            assert_eq!(TwoRegisterState::initial(&f).norm_sq(), one);
            assert_eq!(run.psi1.norm_sq(), one, "q={q}");
            assert_eq!(run.psi2.norm_sq(), one, "q={q}");
        }
    }

    #[test]
    fn middle_state_matches_its_closed_form() {
        // after the controlled unitary the state is
        //   (1/q) sum_x |x, 0>  +  (1/sqrt q) sum_{y != 0} w^((y|b)) |a, y>
        for q in [2u64, 3, 4, 5] {
            let f = gf(q);
            let (p, t) = (f.p(), f.t() as u32);
            for (a, b) in [(1u64, 0u64), (1, 1), (q - 1, q - 1)] {
                let lin = LinearPoly::new(&f, f.element_at(a), f.element_at(b)).unwrap();
                let run = run_interpolation(&f, &lin).unwrap();
                for x in 0..q {
                    for y in 0..q {
                        let want = if y == 0 {
                            Scalar::sqrtq_pow(p, t, -2)
                        } else if x == a {
                            let e = f.bilinear(&f.element_at(y), &f.element_at(b));
                            Scalar::omega_pow(p, t, e).mul_sqrtq(-1)
                        } else {
                            Scalar::zero(p, t)
                        };
                        assert!(
                            run.psi2.amp(x, y).equal(&want),
                            "q={q} a={a} b={b} amp({x},{y})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn outcome_law_matches_the_exact_claims() {
        for q in [2u64, 3, 4, 5, 7, 8, 9] {
            let f = gf(q);
            let picks: Vec<(u64, u64)> = if q <= 5 {
                (1..q).flat_map(|a| (0..q).map(move |b| (a, b))).collect()
            } else {
                vec![(1, 0), (q - 1, 3), (2, q - 1)]
            };
            for (a, b) in picks {
                let lin = LinearPoly::new(&f, f.element_at(a), f.element_at(b)).unwrap();
                let run = run_interpolation(&f, &lin).unwrap();
                let dist = &run.distribution;
                assert!(dist.is_consistent(), "q={q}");
                assert_eq!(dist.p_abort, rational(1, q as i64), "q={q}");
                assert_eq!(dist.p_first(a), BigRational::one(), "q={q} a={a}");
                assert_eq!(
                    dist.p_second(b),
                    rational((q - 1) as i64, q as i64),
                    "q={q} b={b}"
                );
                // every wrong second outcome is equally unlikely
                for z in 0..q {
                    if z != b {
                        assert_eq!(
                            dist.p_second(z),
                            rational(1, (q * (q - 1)) as i64),
                            "q={q}"
                        );
                    }
                }
                assert_eq!(run.quantum_queries, 1);
            }
        }
    }

    #[test]
    fn pipeline_accounts_for_every_query() {
        let f = gf(5);
        let e = |i: u64| f.element_at(i);
        for coeffs in [
            vec![e(3), e(2)],             // degree 1
            vec![e(3), e(1), e(2)],       // degree 2
            vec![e(1), e(0), e(4), e(2)], // degree 3
        ] {
            let d = coeffs.len() - 1;
            let result = interpolate_pipeline(&f, &coeffs).unwrap();
            assert_eq!(result.classical_queries, (d - 1) as u64);
            assert_eq!(result.quantum_queries, 1);
            // the modal outcome is the true (a, b), so recovery is exact
            assert_eq!(result.recovered.coeffs(), &coeffs[..]);
            let rebuilt = reconstruct(
                &f,
                &result.linear,
                &result.reduction.modulus,
                &result.reduction.remainder,
            );
            assert_eq!(rebuilt.coeffs(), &coeffs[..]);
        }
    }

    #[test]
    fn sampler_tracks_the_law() {
        // binomial three-sigma bounds on the exact probabilities
        let f = gf(4);
        let lin = LinearPoly::new(&f, f.element_at(2), f.element_at(3)).unwrap();
        let n = 10_000u64;
        let counts = sample_runs(&f, &lin, n, 7).unwrap();
        assert_eq!(counts.aborts + counts.keeps, n);
        let sigma = ((n as f64) * 0.25 * 0.75).sqrt();
        assert!(
            ((counts.aborts as f64) - (n as f64) * 0.25).abs() <= 3.0 * sigma,
            "abort count {} outside three sigma",
            counts.aborts
        );
        // the first output never misses
        assert_eq!(counts.first_counts.get(&2).copied().unwrap_or(0), counts.keeps);

        let f5 = gf(5);
        let lin = LinearPoly::new(&f5, f5.element_at(3), f5.element_at(1)).unwrap();
        let counts = sample_runs(&f5, &lin, n, 11).unwrap();
        let hits = counts.second_counts.get(&1).copied().unwrap_or(0) as f64;
        let keeps = counts.keeps as f64;
        let sigma = (keeps * 0.8 * 0.2).sqrt();
        assert!((hits - keeps * 0.8).abs() <= 3.0 * sigma, "second-output hit rate off");
        // determinism under a fixed seed
        let again = sample_runs(&f5, &lin, n, 11).unwrap();
        assert_eq!(again.aborts, counts.aborts);
        assert_eq!(again.second_counts, counts.second_counts);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let f = gf(3);
        assert!(matches!(
            LinearPoly::new(&f, f.zero(), f.one()),
            Err(InterpError::ZeroSlope)
        ));
        // a quadratic disguised as claim 1 fails the linearity check
        let e = |i: u64| f.element_at(i);
        let g = Poly::from_coeffs(&f, vec![e(1), e(0), e(1)]);
        let red_n = Poly::constant(&f, f.one());
        let red_r = Poly::zero(&f);
        assert!(matches!(
            linear_part(&f, &g, &red_n, &red_r),
            Err(InterpError::NotLinear)
        ));
    }
}
