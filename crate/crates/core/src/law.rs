//! Perturbation laws of the mother variable `B_η` and their image-measure
//! expansions `dP_η = δ₀ + η dP̄₁ + η² dP̄₂ + o(η²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::material::AmplitudeRange;
use crate::quadrature::Integrator;

/// One term `c · (Dirac at s differentiated k times)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerm {
    pub location: f64,
    pub derivative: u32,
    pub weight: f64,
}

impl ExpansionTerm {
    pub const fn new(location: f64, derivative: u32, weight: f64) -> Self {
        Self { location, derivative, weight }
    }
}

/// A function of one variable with derivatives available at any point.
pub trait SmoothFn {
    /// `f^{(order)}(s)`, or `None` when that order is not provided.
    fn derivative(&self, order: u32, s: f64) -> Option<f64>;

    fn value(&self, s: f64) -> f64 {
        self.derivative(0, s).expect("value of a smooth function")
    }
}

/// Adapter turning a closure `(order, s) -> Option<f64>` into a [`SmoothFn`].
pub struct FnDerivatives<F>(pub F);

impl<F: Fn(u32, f64) -> Option<f64>> SmoothFn for FnDerivatives<F> {
    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        (self.0)(order, s)
    }
}

/// `Σ a_k s^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = 1.0;
        Self(c)
    }
}

impl SmoothFn for Polynomial {
    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        let k = order as usize;
        // Horner on Σ_p a_p p!/(p-k)! s^{p-k}
        let mut acc = 0.0;
        for p in (k..self.0.len()).rev() {
            let falling: f64 = ((p - k + 1)..=p).map(|v| v as f64).product();
            acc = acc * s + self.0[p] * falling;
        }
        Some(acc)
    }
}

/// `Σ_m c_m (-1)^{k_m} f^{(k_m)}(s_m)`.
pub fn act(terms: &[ExpansionTerm], f: &dyn SmoothFn) -> Result<f64> {
    let mut total = 0.0;
    for t in terms {
        let d = f.derivative(t.derivative, t.location).ok_or(Error::MissingDerivative(t.derivative))?;
        let sign = if t.derivative % 2 == 0 { 1.0 } else { -1.0 };
        total += t.weight * sign * d;
    }
    Ok(total)
}

/// The first two orders of an image-measure expansion, with support bound `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassExpansion {
    bound: f64,
    order1: Vec<ExpansionTerm>,
    order2: Vec<ExpansionTerm>,
}

impl PointMassExpansion {
    /// Checks that every location lies in `]-M, M[` and that each order has
    /// zero total mass.
    pub fn new(bound: f64, order1: Vec<ExpansionTerm>, order2: Vec<ExpansionTerm>) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("support bound {bound} must be positive")));
        }
        for (o, terms) in [(1, &order1), (2, &order2)] {
            for t in terms.iter() {
                if !(t.location.abs() < bound) || !t.weight.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "order-{o} term at {} outside ]-{bound}, {bound}[",
                        t.location
                    )));
                }
            }
            let mass: f64 = terms.iter().filter(|t| t.derivative == 0).map(|t| t.weight).sum();
            let scale: f64 = terms.iter().map(|t| t.weight.abs()).sum::<f64>().max(1.0);
            if mass.abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!("order-{o} expansion has nonzero mass {mass}")));
            }
        }
        Ok(Self { bound, order1, order2 })
    }

    pub fn zero(bound: f64) -> Self {
        Self { bound, order1: Vec::new(), order2: Vec::new() }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn order(&self, o: usize) -> &[ExpansionTerm] {
        match o {
            1 => &self.order1,
            2 => &self.order2,
            _ => &[],
        }
    }

    pub fn order1(&self) -> &[ExpansionTerm] {
        &self.order1
    }

    pub fn order2(&self) -> &[ExpansionTerm] {
        &self.order2
    }

    /// Highest derivative order `p₁`.
    pub fn p1(&self) -> u32 {
        self.order1.iter().map(|t| t.derivative).max().unwrap_or(0)
    }

    /// Highest derivative order `p₂`.
    pub fn p2(&self) -> u32 {
        self.order2.iter().map(|t| t.derivative).max().unwrap_or(0)
    }

    /// `φ(0) + η⟨dP̄₁,φ⟩ + η²⟨dP̄₂,φ⟩`.
    pub fn predict(&self, eta: f64, f: &dyn SmoothFn) -> Result<f64> {
        Ok(f.value(0.0) + eta * act(&self.order1, f)? + eta * eta * act(&self.order2, f)?)
    }

    /// Hull of the locations (and 0).
    pub fn location_range(&self) -> AmplitudeRange {
        let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
        for t in self.order1.iter().chain(&self.order2) {
            lo = lo.min(t.location);
            hi = hi.max(t.location);
        }
        AmplitudeRange { lo, hi }
    }
}

/// Moments used by the corrector route, for laws with `B_η = ηB̄₀ + η²R̄₀ + o(η²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawMoments {
    pub mean_b0: f64,
    pub var_b0: f64,
    pub mean_b0_sq: f64,
    pub mean_r0: f64,
}

impl LawMoments {
    pub fn zero() -> Self {
        Self { mean_b0: 0.0, var_b0: 0.0, mean_b0_sq: 0.0, mean_r0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawKind {
    Zero,
    Bernoulli,
    ClippedGaussian,
    BernoulliGaussian,
    BernoulliMinusUniform,
    Custom,
}

impl LawKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "zero" => LawKind::Zero,
            "bernoulli" => LawKind::Bernoulli,
            "clipped-gaussian" => LawKind::ClippedGaussian,
            "bernoulli-gaussian" | "bernoulli×gaussian" => LawKind::BernoulliGaussian,
            "bernoulli-minus-uniform" => LawKind::BernoulliMinusUniform,
            "custom" => LawKind::Custom,
            other => return Err(Error::UnknownLaw(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LawKind::Zero => "zero",
            LawKind::Bernoulli => "bernoulli",
            LawKind::ClippedGaussian => "clipped-gaussian",
            LawKind::BernoulliGaussian => "bernoulli-gaussian",
            LawKind::BernoulliMinusUniform => "bernoulli-minus-uniform",
            LawKind::Custom => "custom",
        }
    }
}

/// Default support bound `M` and margin `ε` of the built-in laws: every
/// sample lies in `[-(M-ε), M-ε] = [-1, 1]`.
pub const DEFAULT_BOUND: f64 = 1.1;
pub const DEFAULT_MARGIN: f64 = 0.1;

/// The mother variable `B_η`: sampler, expansion, support and moment data.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationLaw {
    kind: LawKind,
    expansion: PointMassExpansion,
    moments: Option<LawMoments>,
    margin: f64,
    custom_support: Option<AmplitudeRange>,
}

fn normal_pdf(g: f64) -> f64 {
    (-0.5 * g * g).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// `E(G^p 1_{G ≥ 0})` for a standard Gaussian `G`, by quadrature.
pub fn half_gaussian_moment(p: i32) -> f64 {
    Integrator::default()
        .integrate(&|g| g.powi(p) * normal_pdf(g), 0.0, 40.0)
        .expect("half-Gaussian moment quadrature")
}

/// Builds a built-in law with the default bound `M`.
pub fn builtin_law(kind: LawKind) -> Result<PerturbationLaw> {
    use ExpansionTerm as T;
    let m = DEFAULT_BOUND;
    let (expansion, moments) = match kind {
        LawKind::Zero => (PointMassExpansion::zero(m), Some(LawMoments::zero())),
        LawKind::Bernoulli => (PointMassExpansion::new(m, vec![T::new(1.0, 0, 1.0), T::new(0.0, 0, -1.0)], vec![])?, None),
        LawKind::ClippedGaussian => {
            let mean = half_gaussian_moment(1);
            let second = half_gaussian_moment(2);
            let expansion = PointMassExpansion::new(m, vec![T::new(0.0, 1, -mean)], vec![T::new(0.0, 2, 0.5 * second)])?;
            let moments = LawMoments { mean_b0: mean, var_b0: second - mean * mean, mean_b0_sq: second, mean_r0: 0.0 };
            (expansion, Some(moments))
        }
        LawKind::BernoulliGaussian => (PointMassExpansion::zero(m), None),
        LawKind::BernoulliMinusUniform => {
            let (eu, eu2) = (0.5, 1.0 / 3.0);
            let expansion = PointMassExpansion::new(
                m,
                vec![T::new(0.0, 1, eu), T::new(1.0, 0, 1.0), T::new(0.0, 0, -1.0)],
                vec![T::new(1.0, 1, eu), T::new(0.0, 1, -eu), T::new(0.0, 2, 0.5 * eu2)],
            )?;
            (expansion, None)
        }
        LawKind::Custom => {
            return Err(Error::InvalidParameter("custom laws are built with PerturbationLaw::custom".into()))
        }
    };
    Ok(PerturbationLaw { kind, expansion, moments, margin: DEFAULT_MARGIN, custom_support: None })
}

/// Looks a built-in law up by name.
pub fn builtin_law_named(name: &str) -> Result<PerturbationLaw> {
    builtin_law(LawKind::parse(name)?)
}

impl PerturbationLaw {
    /// A user-supplied expansion without sampler. `support` is the amplitude
    /// interval used for coercivity checks.
    pub fn custom(expansion: PointMassExpansion, moments: Option<LawMoments>, support: AmplitudeRange) -> Result<Self> {
        let m = expansion.bound();
        if support.bound() >= m {
            return Err(Error::InvalidParameter(format!("support {support:?} must lie inside ]-{m}, {m}[")));
        }
        Ok(Self { kind: LawKind::Custom, expansion, moments, margin: m - support.bound(), custom_support: Some(support) })
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn expansion(&self) -> &PointMassExpansion {
        &self.expansion
    }

    pub fn moments(&self) -> Result<LawMoments> {
        self.moments.ok_or_else(|| Error::NoMoments(self.name().into()))
    }

    /// `M`.
    pub fn bound(&self) -> f64 {
        self.expansion.bound()
    }

    /// `ε`: samples satisfy `|B_η| ≤ M - ε`.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    fn check_eta(&self, eta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("eta = {eta} outside [0, 1]")));
        }
        Ok(())
    }

    /// Interval containing every value `B_η` can take.
    pub fn support(&self, eta: f64) -> Result<AmplitudeRange> {
        self.check_eta(eta)?;
        Ok(match self.kind {
            LawKind::Zero => AmplitudeRange { lo: 0.0, hi: 0.0 },
            LawKind::Bernoulli | LawKind::ClippedGaussian => AmplitudeRange { lo: 0.0, hi: if eta > 0.0 { 1.0 } else { 0.0 } },
            LawKind::BernoulliGaussian => AmplitudeRange { lo: -1.0, hi: 1.0 },
            LawKind::BernoulliMinusUniform => AmplitudeRange { lo: -eta, hi: 1.0 },
            LawKind::Custom => self.custom_support.expect("custom support"),
        })
    }

    /// Interval covering both the sample support and the expansion's
    /// locations; coercivity must hold on it.
    pub fn amplitude_range(&self, eta: f64) -> Result<AmplitudeRange> {
        let s = self.support(eta)?;
        let l = self.expansion.location_range();
        Ok(AmplitudeRange { lo: s.lo.min(l.lo), hi: s.hi.max(l.hi) })
    }

    /// One draw of `B_η`.
    pub fn sample<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> Result<f64> {
        self.check_eta(eta)?;
        let value = match self.kind {
            LawKind::Zero => 0.0,
            LawKind::Bernoulli => bernoulli(eta, rng),
            LawKind::ClippedGaussian => {
                let g: f64 = rng.sample(StandardNormal);
                let b = eta * g;
                if (0.0..=1.0).contains(&b) {
                    b
                } else {
                    0.0
                }
            }
            LawKind::BernoulliGaussian => {
                let r = bernoulli(eta, rng);
                let g: f64 = rng.sample(StandardNormal);
                let b = eta * g;
                if b.abs() <= 1.0 {
                    r * b
                } else {
                    0.0
                }
            }
            LawKind::BernoulliMinusUniform => {
                let r = bernoulli(eta, rng);
                let u: f64 = rng.random();
                r - eta * u
            }
            LawKind::Custom => return Err(Error::NoSampler(self.name().into())),
        };
        Ok(value)
    }

    /// `count` i.i.d. draws from the substream `stream` of `seed`.
    pub fn sample_cells(&self, eta: f64, count: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
        let mut rng = substream(seed, stream);
        (0..count).map(|_| self.sample(eta, &mut rng)).collect()
    }

    /// `E(φ(B_η))` computed exactly: finite sums for the discrete parts and
    /// adaptive Gauss–Legendre quadrature for the continuous ones.
    pub fn exact_expectation(&self, eta: f64, phi: &dyn Fn(f64) -> f64, integrator: &Integrator) -> Result<f64> {
        self.check_eta(eta)?;
        let gauss_part = |lo: f64, hi: f64| -> Result<(f64, f64)> {
            // ∫_{lo}^{hi} φ(ηg) pdf(g) dg and the Gaussian mass outside [lo, hi]
            let cut_lo = lo.max(-40.0);
            let cut_hi = hi.min(40.0);
            let inner = integrator.integrate(&|g| phi(eta * g) * normal_pdf(g), cut_lo, cut_hi)?;
            let outside = 0.5 * libm::erfc(hi / core::f64::consts::SQRT_2) + 0.5 * libm::erfc(-lo / core::f64::consts::SQRT_2);
            Ok((inner, outside))
        };
        Ok(match self.kind {
            LawKind::Zero => phi(0.0),
            LawKind::Bernoulli => (1.0 - eta) * phi(0.0) + eta * phi(1.0),
            LawKind::ClippedGaussian => {
                if eta == 0.0 {
                    return Ok(phi(0.0));
                }
                let (inner, outside) = gauss_part(0.0, 1.0 / eta)?;
                inner + outside * phi(0.0)
            }
            LawKind::BernoulliGaussian => {
                if eta == 0.0 {
                    return Ok(phi(0.0));
                }
                let (inner, outside) = gauss_part(-1.0 / eta, 1.0 / eta)?;
                (1.0 - eta) * phi(0.0) + eta * (inner + outside * phi(0.0))
            }
            LawKind::BernoulliMinusUniform => {
                let one = integrator.integrate(&|u| phi(1.0 - eta * u), 0.0, 1.0)?;
                let zero = integrator.integrate(&|u| phi(-eta * u), 0.0, 1.0)?;
                eta * one + (1.0 - eta) * zero
            }
            LawKind::Custom => return Err(Error::NoSampler(self.name().into())),
        })
    }
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Independent, reproducible generator for stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Empirical moments of `B_η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub mean: f64,
    pub mean_sq: f64,
    pub variance: f64,
    pub samples: usize,
}

pub fn moment_oracle(law: &PerturbationLaw, eta: f64, samples: usize, seed: u64) -> Result<EmpiricalMoments> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample needed".into()));
    }
    let mut rng = substream(seed, 0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let b = law.sample(eta, &mut rng)?;
        s1 += b;
        s2 += b * b;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let mean_sq = s2 / n;
    Ok(EmpiricalMoments { mean, mean_sq, variance: (mean_sq - mean * mean).max(0.0), samples })
}

/// One comparison of `E(φ(B_η))` with the expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCheck {
    pub function: String,
    pub eta: f64,
    pub exact: f64,
    pub predicted: f64,
    pub residual: f64,
    /// `|residual| / η²`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub law: String,
    pub checks: Vec<ExpansionCheck>,
    /// Per function: `|residual|/η²` never increases as `η` decreases
    /// (up to `tolerance`), or stays below `tolerance` throughout.
    pub consistent: bool,
}

/// Compares exact expectations of smooth test functions with the expansion
/// along a list of `η` values.
pub fn validate_expansion(
    law: &PerturbationLaw,
    etas: &[f64],
    functions: &[(&str, &dyn SmoothFn)],
    tolerance: f64,
) -> Result<ExpansionReport> {
    let integrator = Integrator::default();
    let mut sorted = etas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut checks = Vec::new();
    let mut consistent = true;
    for (name, f) in functions {
        let mut prev: Option<f64> = None;
        for &eta in &sorted {
            let exact = law.exact_expectation(eta, &|s| f.value(s), &integrator)?;
            let predicted = law.expansion().predict(eta, *f)?;
            let residual = exact - predicted;
            let scaled = if eta > 0.0 { residual.abs() / (eta * eta) } else { 0.0 };
            if let Some(p) = prev {
                if scaled > p + tolerance {
                    consistent = false;
                }
            }
            prev = Some(scaled);
            checks.push(ExpansionCheck { function: name.to_string(), eta, exact, predicted, residual, scaled });
        }
    }
    Ok(ExpansionReport { law: law.name().to_string(), checks, consistent })
}
