//! Random multiscale coefficient families, force families and parameter sampling.
//!
//! Parameters are drawn i.i.d. uniform from per-family hyper-rectangles. Each
//! sample index owns an independent ChaCha8 stream keyed by the run seed, so a
//! parameter list is identical no matter how (or in what order) it is produced.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Rect;

const EX1_EPS: [f64; 5] = [1.0 / 47.0, 1.0 / 29.0, 1.0 / 53.0, 1.0 / 37.0, 1.0 / 41.0];
const EX1_P: [f64; 5] = [1.98, 1.96, 1.94, 1.92, 1.9];
const EX2_EPS: [f64; 8] = [
    1.0 / 43.0,
    1.0 / 41.0,
    1.0 / 47.0,
    1.0 / 29.0,
    1.0 / 37.0,
    1.0 / 31.0,
    1.0 / 53.0,
    1.0 / 35.0,
];
/// Lower-left corners of the three high-contrast stripes of the interface family.
pub const INTERFACE_STRIPES: [(f64, f64); 3] = [(0.3, 0.1), (0.5, 0.1), (0.7, 0.1)];
pub const INTERFACE_STRIPE_HEIGHT: f64 = 0.8;
/// Stripe width in mesh steps.
pub const INTERFACE_STRIPE_CELLS: f64 = 10.0;
/// Width of the Gaussian point source.
pub const GAUSSIAN_SIGMA: f64 = 0.01;

/// Random coefficient families `a(x, y; xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffFamily {
    /// Affine sum of five oscillating ratio terms, `xi in [0,1]^5`.
    Ex1,
    /// Exponential of eight separable trigonometric modes, `xi in [-1/2,1/2]^8`.
    Ex2,
    /// Discontinuous: two exponential fields switched by three thin stripes, `xi in [-2/3,2/3]^12`.
    Interface { stripe_width: f64 },
    /// Exponential of 18 plane waves, `xi in [-1/5,1/5]^18`.
    Ex3,
    /// Exponential of 24 plane waves, `xi in [-1/6,1/6]^24`.
    Ex4,
}

impl CoeffFamily {
    /// Parses a family id; the interface stripes are `10h` wide on an `n` mesh.
    pub fn parse(id: &str, n: usize) -> Result<Self> {
        match id {
            "ex1" => Ok(Self::Ex1),
            "ex2" => Ok(Self::Ex2),
            "interface" => Ok(Self::Interface {
                stripe_width: INTERFACE_STRIPE_CELLS / n as f64,
            }),
            "ex3" => Ok(Self::Ex3),
            "ex4" => Ok(Self::Ex4),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Ex1 => "ex1",
            Self::Ex2 => "ex2",
            Self::Interface { .. } => "interface",
            Self::Ex3 => "ex3",
            Self::Ex4 => "ex4",
        }
    }

    /// Number of random variables `r`.
    pub fn dim(&self) -> usize {
        match self {
            Self::Ex1 => 5,
            Self::Ex2 => 8,
            Self::Interface { .. } => 12,
            Self::Ex3 => 18,
            Self::Ex4 => 24,
        }
    }

    /// Common range of every `xi_i`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Ex1 => (0.0, 1.0),
            Self::Ex2 => (-0.5, 0.5),
            Self::Interface { .. } => (-2.0 / 3.0, 2.0 / 3.0),
            Self::Ex3 => (-0.2, 0.2),
            Self::Ex4 => (-1.0 / 6.0, 1.0 / 6.0),
        }
    }

    /// Multiscale lengths `eps_i`.
    pub fn epsilons(&self) -> Vec<f64> {
        match self {
            Self::Ex1 => EX1_EPS.to_vec(),
            Self::Ex2 => EX2_EPS.to_vec(),
            Self::Interface { .. } => (1..=12)
                .map(|i| {
                    if i <= 6 {
                        (1 + i) as f64 / 100.0
                    } else {
                        (i + 13) as f64 / 100.0
                    }
                })
                .collect(),
            Self::Ex3 => (1..=18).map(|i| 1.0 / (2 * i + 9) as f64).collect(),
            Self::Ex4 => (1..=24).map(|i| (1 + i) as f64 / 100.0).collect(),
        }
    }

    /// Force family used with this coefficient in the reference experiments.
    pub fn default_force(&self) -> ForceFamily {
        match self {
            Self::Ex1 => ForceFamily::TrigIndicatorEx1,
            Self::Ex2 | Self::Interface { .. } => ForceFamily::TrigIndicatorEx2,
            Self::Ex3 => ForceFamily::GaussianCenter,
            Self::Ex4 => ForceFamily::RandomTrig,
        }
    }

    /// Evaluates `a(x, y; xi)`.
    pub fn eval(&self, xi: &[f64], x: f64, y: f64) -> f64 {
        debug_assert_eq!(xi.len(), self.dim());
        match self {
            Self::Ex1 => {
                let mut a = EX1_CONSTANT;
                for (i, &w) in xi.iter().enumerate() {
                    a += ex1_ratio(i, x, y) * w;
                }
                a
            }
            Self::Ex2 => {
                let mut s = 0.0;
                for (k, (&w, eps)) in xi.iter().zip(EX2_EPS).enumerate() {
                    let i = (k + 1) as f64;
                    s += (2.0 * PI * (9.0 - i) * x / (9.0 * eps)).sin()
                        * (2.0 * PI * i * y / (9.0 * eps)).cos()
                        * w;
                }
                s.exp()
            }
            Self::Interface { stripe_width } => {
                let eps = self.epsilons();
                let (outer, inner) = (&xi[..6], &xi[6..]);
                if in_stripes(*stripe_width, x, y) {
                    let angles = (1..=6).map(|i| (i as f64 + 0.5) * PI / 6.0);
                    plane_wave_exp(inner, &eps[6..], angles, x, y)
                } else {
                    let angles = (1..=6).map(|i| i as f64 * PI / 6.0);
                    plane_wave_exp(outer, &eps[..6], angles, x, y)
                }
            }
            Self::Ex3 | Self::Ex4 => {
                let r = self.dim();
                let eps = self.epsilons();
                let angles = (1..=r).map(|i| i as f64 * PI / r as f64);
                plane_wave_exp(xi, &eps, angles, x, y)
            }
        }
    }

    /// [`Self::eval`] that rejects non-positive values.
    pub fn eval_checked(&self, xi: &[f64], x: f64, y: f64) -> Result<f64> {
        let value = self.eval(xi, x, y);
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::ContrastViolation { x, y, value })
        }
    }

    /// Affine split `a = sum_n weight_n(xi) a_n(x, y)`; only `ex1` has one.
    pub fn affine_terms(&self) -> Result<Vec<AffineTerm>> {
        match self {
            Self::Ex1 => {
                let mut terms = vec![AffineTerm::Constant];
                terms.extend((0..5).map(AffineTerm::Ratio));
                Ok(terms)
            }
            other => Err(Error::NotAffine(other.id().to_string())),
        }
    }
}

impl fmt::Display for CoeffFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

const EX1_CONSTANT: f64 = 0.1;

fn ex1_ratio(i: usize, x: f64, y: f64) -> f64 {
    let (e, p) = (EX1_EPS[i], EX1_P[i]);
    let tau = 2.0 * PI;
    let sqrt5 = 5f64.sqrt();
    let (num, den) = match i {
        0 => ((tau * x / e).sin(), -(tau * y / e).cos()),
        1 => (
            (tau * (x + y) / (SQRT_2 * e)).sin(),
            -(tau * (x - y) / (SQRT_2 * e)).sin(),
        ),
        2 => ((tau * (x - 0.5) / e).cos(), -(tau * (y - 0.5) / e).cos()),
        3 => (
            (tau * (x - y) / (SQRT_2 * e)).cos(),
            -(tau * (x + y) / (SQRT_2 * e)).sin(),
        ),
        4 => (
            (tau * (2.0 * x - y) / (sqrt5 * e)).cos(),
            -(tau * (x + 2.0 * y) / (sqrt5 * e)).sin(),
        ),
        _ => unreachable!("ex1 has five ratio terms"),
    };
    (2.0 + p * num) / (2.0 + p * den)
}

fn plane_wave_exp(
    xi: &[f64],
    eps: &[f64],
    angles: impl Iterator<Item = f64>,
    x: f64,
    y: f64,
) -> f64 {
    let s: f64 = xi
        .iter()
        .zip(eps)
        .zip(angles)
        .map(|((&w, &e), t)| (2.0 * PI * (x * t.sin() + y * t.cos()) / e).sin() * w)
        .sum();
    s.exp()
}

fn in_stripes(width: f64, x: f64, y: f64) -> bool {
    INTERFACE_STRIPES
        .iter()
        .any(|&(x0, y0)| Rect::new(x0, x0 + width, y0, y0 + INTERFACE_STRIPE_HEIGHT).contains(x, y))
}

/// One term of an affine coefficient split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineTerm {
    /// The constant background `0.1`, weight 1.
    Constant,
    /// The `i`-th ratio function, weight `xi_i`.
    Ratio(usize),
}

impl AffineTerm {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Constant => EX1_CONSTANT,
            Self::Ratio(i) => ex1_ratio(i, x, y),
        }
    }

    pub fn weight(&self, xi: &[f64]) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Ratio(i) => xi[i],
        }
    }
}

/// Force families `f(x, y; theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceFamily {
    /// `sin(2 pi x) cos(2 pi y)` on `D2`.
    TrigIndicatorEx1,
    /// `cos(2 pi x) sin(2 pi y)` on `D2`.
    TrigIndicatorEx2,
    /// Gaussian density with `sigma = 0.01` centred at `theta in D2`.
    GaussianCenter,
    /// `sin(pi (t1 x + 2 t2)) cos(pi (t3 y + 2 t4))` on `D2`, `theta in [0,2]^4`.
    RandomTrig,
}

impl ForceFamily {
    pub fn id(&self) -> &'static str {
        match self {
            Self::TrigIndicatorEx1 => "trig_indicator_ex1",
            Self::TrigIndicatorEx2 => "trig_indicator_ex2",
            Self::GaussianCenter => "gaussian_center",
            Self::RandomTrig => "random_trig",
        }
    }

    /// Ranges of the force parameters (empty for deterministic forces).
    pub fn param_ranges(&self) -> Vec<(f64, f64)> {
        let d2 = Rect::d2();
        match self {
            Self::TrigIndicatorEx1 | Self::TrigIndicatorEx2 => Vec::new(),
            Self::GaussianCenter => vec![(d2.x0, d2.x1), (d2.y0, d2.y1)],
            Self::RandomTrig => vec![(0.0, 2.0); 4],
        }
    }

    pub fn dim(&self) -> usize {
        self.param_ranges().len()
    }

    pub fn eval(&self, theta: &[f64], x: f64, y: f64) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        let tau = 2.0 * PI;
        let in_d2 = Rect::d2().contains(x, y);
        match self {
            Self::TrigIndicatorEx1 if in_d2 => (tau * x).sin() * (tau * y).cos(),
            Self::TrigIndicatorEx2 if in_d2 => (tau * x).cos() * (tau * y).sin(),
            Self::GaussianCenter => {
                let s2 = GAUSSIAN_SIGMA * GAUSSIAN_SIGMA;
                let d2 = (x - theta[0]).powi(2) + (y - theta[1]).powi(2);
                (-d2 / (2.0 * s2)).exp() / (tau * s2)
            }
            Self::RandomTrig if in_d2 => {
                (PI * (theta[0] * x + 2.0 * theta[1])).sin()
                    * (PI * (theta[2] * y + 2.0 * theta[3])).cos()
            }
            _ => 0.0,
        }
    }
}

impl FromStr for ForceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trig_indicator_ex1" => Ok(Self::TrigIndicatorEx1),
            "trig_indicator_ex2" => Ok(Self::TrigIndicatorEx2),
            "gaussian_center" => Ok(Self::GaussianCenter),
            "random_trig" => Ok(Self::RandomTrig),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for ForceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One realization of the random inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl ParamVector {
    pub fn new(xi: Vec<f64>, theta: Vec<f64>) -> Self {
        Self {
            xi,
            theta,
            seed: 0,
            index: 0,
        }
    }

    /// Map input `(xi, theta)` as one vector.
    pub fn input(&self) -> Vec<f64> {
        self.xi.iter().chain(&self.theta).copied().collect()
    }
}

/// Per-dimension ranges of the combined input `(xi, theta)`.
pub fn input_ranges(family: &CoeffFamily, force: &ForceFamily) -> Vec<(f64, f64)> {
    let mut ranges = vec![family.range(); family.dim()];
    ranges.extend(force.param_ranges());
    ranges
}

/// The RNG stream owned by sample `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one parameter vector from its own stream.
pub fn sample_one(family: &CoeffFamily, force: &ForceFamily, seed: u64, index: u64) -> ParamVector {
    let mut rng = stream(seed, index);
    let (lo, hi) = family.range();
    let xi = (0..family.dim())
        .map(|_| lo + (hi - lo) * rng.gen::<f64>())
        .collect();
    let theta = force
        .param_ranges()
        .into_iter()
        .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
        .collect();
    ParamVector {
        xi,
        theta,
        seed,
        index,
    }
}

/// Draws `count` i.i.d. uniform parameter vectors; sample `i` uses stream `i`.
pub fn sample_params(
    family: &CoeffFamily,
    force: &ForceFamily,
    seed: u64,
    count: usize,
) -> Result<Vec<ParamVector>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    Ok((0..count as u64)
        .map(|i| sample_one(family, force, seed, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families(n: usize) -> Vec<CoeffFamily> {
        ["ex1", "ex2", "interface", "ex3", "ex4"]
            .iter()
            .map(|id| CoeffFamily::parse(id, n).unwrap())
            .collect()
    }

    #[test]
    fn dims_and_epsilons() {
        let dims: Vec<usize> = all_families(64).iter().map(|f| f.dim()).collect();
        assert_eq!(dims, vec![5, 8, 12, 18, 24]);
        let iface = CoeffFamily::parse("interface", 64).unwrap();
        let eps = iface.epsilons();
        assert_eq!(eps[0], 0.02);
        assert_eq!(eps[5], 0.07);
        assert_eq!(eps[6], 0.20);
        assert_eq!(eps[11], 0.25);
        assert_eq!(CoeffFamily::Ex3.epsilons()[0], 1.0 / 11.0);
        assert_eq!(CoeffFamily::Ex4.epsilons()[23], 0.25);
        for f in all_families(64) {
            assert_eq!(f.epsilons().len(), f.dim());
        }
    }

    #[test]
    fn unknown_family_rejected() {
        assert!(matches!(
            CoeffFamily::parse("ex9", 64),
            Err(Error::UnknownFamily(_))
        ));
        assert!("cosine".parse::<ForceFamily>().is_err());
    }

    #[test]
    fn zero_parameters() {
        for &(x, y) in &[(0.1, 0.2), (0.77, 0.3), (0.5, 0.5)] {
            assert_eq!(CoeffFamily::Ex1.eval(&[0.0; 5], x, y), 0.1);
            assert_eq!(CoeffFamily::Ex2.eval(&[0.0; 8], x, y), 1.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let f = CoeffFamily::Ex1;
        let force = f.default_force();
        let a = sample_params(&f, &force, 7, 2000).unwrap();
        let b = sample_params(&f, &force, 7, 2000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2000);
        assert!(a
            .iter()
            .flat_map(|p| &p.xi)
            .all(|&v| (0.0..=1.0).contains(&v)));
        let c = sample_params(&f, &force, 8, 1).unwrap();
        assert_ne!(a[0], c[0]);
        assert_eq!(sample_params(&f, &force, 8, 1).unwrap(), c);
        assert!(sample_params(&f, &force, 8, 0).is_err());
    }

    #[test]
    fn streams_are_index_addressed() {
        let f = CoeffFamily::Ex3;
        let force = f.default_force();
        let list = sample_params(&f, &force, 3, 50).unwrap();
        assert_eq!(sample_one(&f, &force, 3, 37), list[37]);
        assert_eq!(list[37].theta.len(), 2);
    }

    #[test]
    fn ex2_order_statistics() {
        let f = CoeffFamily::Ex2;
        let list = sample_params(&f, &f.default_force(), 11, 10_000).unwrap();
        for i in 0..8 {
            let (mn, mx) = list.iter().fold((f64::MAX, f64::MIN), |(a, b), p| {
                (a.min(p.xi[i]), b.max(p.xi[i]))
            });
            assert!((-0.5..=-0.45).contains(&mn), "min {mn}");
            assert!((0.45..=0.5).contains(&mx), "max {mx}");
        }
    }

    #[test]
    fn force_values() {
        assert_eq!(ForceFamily::TrigIndicatorEx1.eval(&[], 0.0, 0.0), 0.0);
        let peak = ForceFamily::GaussianCenter.eval(&[0.4, 0.2], 0.4, 0.2);
        let expected = 1.0 / (2.0 * PI * GAUSSIAN_SIGMA * GAUSSIAN_SIGMA);
        assert!((peak - expected).abs() < 1e-9 * expected);
        assert!(ForceFamily::TrigIndicatorEx2.eval(&[], 0.4, 0.5).abs() == 0.0);
        assert!(ForceFamily::TrigIndicatorEx2.eval(&[], 0.4, 0.2).abs() > 0.0);
    }

    #[test]
    fn random_trig_integral_matches_fine_quadrature() {
        // Independent oracle: exact antiderivatives over D2, compared with a
        // 1000 x 1000 midpoint rule over the whole square.
        let theta = [1.3, 0.4, 0.7, 1.9];
        let f = ForceFamily::RandomTrig;
        let m = 1000;
        let mut quad = 0.0;
        for j in 0..m {
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64;
                let y = (j as f64 + 0.5) / m as f64;
                quad += f.eval(&theta, x, y);
            }
        }
        quad /= (m * m) as f64;
        let d2 = Rect::d2();
        let ix = (-(PI * (theta[0] * d2.x1 + 2.0 * theta[1])).cos()
            + (PI * (theta[0] * d2.x0 + 2.0 * theta[1])).cos())
            / (PI * theta[0]);
        let iy = ((PI * (theta[2] * d2.y1 + 2.0 * theta[3])).sin()
            - (PI * (theta[2] * d2.y0 + 2.0 * theta[3])).sin())
            / (PI * theta[2]);
        assert!(quad.is_finite());
        assert!((quad - ix * iy).abs() < 1e-3, "{quad} vs {}", ix * iy);
    }

    #[test]
    fn affine_reconstruction_is_exact() {
        let terms = CoeffFamily::Ex1.affine_terms().unwrap();
        assert_eq!(terms.len(), 6);
        let mut rng = stream(99, 0);
        for _ in 0..1000 {
            let (x, y): (f64, f64) = (rng.gen(), rng.gen());
            let xi: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
            let recon: f64 = terms.iter().map(|t| t.weight(&xi) * t.eval(x, y)).sum();
            let direct = CoeffFamily::Ex1.eval(&xi, x, y);
            assert!((recon - direct).abs() <= 1e-14 * direct.abs());
        }
        let e1 = [1.0, 0.0, 0.0, 0.0, 0.0];
        let (x, y) = (0.3, 0.6);
        assert_eq!(CoeffFamily::Ex1.eval(&e1, x, y), 0.1 + terms[1].eval(x, y));
    }

    #[test]
    fn non_affine_families_refuse() {
        for f in all_families(64).into_iter().skip(1) {
            assert!(matches!(f.affine_terms(), Err(Error::NotAffine(_))));
        }
    }

    #[test]
    fn uniform_ellipticity_holds_empirically() {
        for fam in all_families(64) {
            let force = fam.default_force();
            let (mut lo, mut hi) = (f64::MAX, 0.0f64);
            let mut rng = stream(5, 1);
            for k in 0..100_000u64 {
                let p = sample_one(&fam, &force, 17, k % 500);
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let a = fam.eval_checked(&p.xi, x, y).unwrap();
                lo = lo.min(a);
                hi = hi.max(a);
            }
            assert!(lo > 0.0 && hi.is_finite(), "{fam}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn interface_switches_inside_stripes() {
        let fam = CoeffFamily::parse("interface", 64).unwrap();
        let mut xi = vec![0.0; 12];
        xi[6] = 0.5; // only the stripe field varies
        let inside = fam.eval(&xi, 0.3 + 0.5 / 64.0, 0.5);
        let outside = fam.eval(&xi, 0.48, 0.5);
        assert_eq!(outside, 1.0);
        assert_ne!(inside, 1.0);
        // closed rectangle: the right edge still belongs to the stripe
        let edge = fam.eval(&xi, 0.3 + 10.0 / 64.0, 0.5);
        assert_ne!(edge, 1.0);
    }

    #[test]
    fn ex1_contrast_order_of_magnitude() {
        // max/min over a 512^2 grid and 1000 draws; reported value is about 4.5e3.
        let fam = CoeffFamily::Ex1;
        let params = sample_params(&fam, &fam.default_force(), 2024, 1000).unwrap();
        let m = 512;
        let (mut lo, mut hi) = (f64::MAX, 0.0f64);
        for j in 0..=m {
            for i in 0..=m {
                let (x, y) = (i as f64 / m as f64, j as f64 / m as f64);
                let r: Vec<f64> = (0..5).map(|k| ex1_ratio(k, x, y)).collect();
                for p in &params {
                    let a = EX1_CONSTANT + r.iter().zip(&p.xi).map(|(r, w)| r * w).sum::<f64>();
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
        }
        let kappa = hi / lo;
        assert!(
            kappa > 4.5e3 / 2.0 && kappa < 4.5e3 * 2.0,
            "contrast {kappa}"
        );
    }
}
