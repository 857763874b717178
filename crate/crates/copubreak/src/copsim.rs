//! Simulators for residual panels with a known cross-sectional dependence
//! structure, plus closed-form copula helpers for calibration.
//!
//! Three families are provided:
//!
//! * **factor-skewt** — a linear one-factor model `eta_it = theta_t * Z_t +
//!!  q_it` with a skewed Student-t common factor and Student-t
//!   idiosyncratic noise; dependence strength is driven by `theta_t`.
//! * **clayton** — exchangeable draws from the Clayton copula (lower-tail
//!   dependent), sampled through a gamma frailty.
//! * **gumbel** — exchangeable draws from the Gumbel copula (upper-tail
//!   dependent), sampled through a positive-stable frailty.
//!
//! Each family supports a single step break: the dependence parameter
//! switches from `theta_pre` to `theta_post` after row `floor(s0 * T)`.
//! Panels are generated row by row from one seeded stream, so a given
//! `(spec, seed)` always yields a bit-identical panel.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StudentT};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::depmeasures::max_rank_leq;
use crate::error::{Error, Result};
use crate::panel::{Matrix, ResidualPanel};

/// Copula family of a simulated panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    FactorSkewT,
    Clayton,
    Gumbel,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::FactorSkewT => write!(f, "factor"),
            Family::Clayton => write!(f, "clayton"),
            Family::Gumbel => write!(f, "gumbel"),
        }
    }
}

/// Full description of a simulated data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub family: Family,
    /// Dependence parameter before the break (and throughout, absent one).
    pub theta_pre: f64,
    /// Dependence parameter after the break; ignored without a break.
    pub theta_post: f64,
    /// Break location as a fraction of the sample, or `None` for a
    /// constant-dependence panel.
    pub break_fraction: Option<f64>,
    /// Inverse degrees of freedom of the factor family's distributions.
    pub nu_inv: f64,
    /// Skewness of the common factor (factor family only).
    pub lambda_skew: f64,
    /// Number of rows to simulate.
    pub t_len: usize,
    /// Number of columns to simulate.
    pub n_cols: usize,
}

impl DgpSpec {
    /// A constant-dependence factor spec with conventional defaults
    /// (`nu_inv = 0.25`, symmetric factor).
    pub fn factor(theta: f64, t_len: usize, n_cols: usize) -> Self {
        DgpSpec {
            family: Family::FactorSkewT,
            theta_pre: theta,
            theta_post: theta,
            break_fraction: None,
            nu_inv: 0.25,
            lambda_skew: 0.0,
            t_len,
            n_cols,
        }
    }

    pub fn clayton(theta: f64, t_len: usize, n_cols: usize) -> Self {
        DgpSpec { family: Family::Clayton, theta_pre: theta, ..Self::factor(theta, t_len, n_cols) }
    }

    pub fn gumbel(theta: f64, t_len: usize, n_cols: usize) -> Self {
        DgpSpec { family: Family::Gumbel, theta_pre: theta, ..Self::factor(theta, t_len, n_cols) }
    }

    /// Add a step break: the parameter switches to `theta_post` after row
    /// `floor(s0 * T)`.
    pub fn with_break(mut self, s0: f64, theta_post: f64) -> Self {
        self.break_fraction = Some(s0);
        self.theta_post = theta_post;
        self
    }

    /// Parse the CLI spec string, e.g.
    /// `"factor:nu_inv=0.25,lambda=-0.5,theta0=1,theta1=1.5,s0=0.5"` or
    /// `"clayton:theta0=2.5,theta1=3.5,s0=0.5"`. Dimensions come from the
    /// caller. Without `s0` the panel has constant dependence `theta0`.
    pub fn parse(text: &str, t_len: usize, n_cols: usize) -> Result<Self> {
        let text = text.trim();
        let (family_str, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), r.trim()),
            None => (text, ""),
        };
        let family = match family_str.to_ascii_lowercase().as_str() {
            "factor" | "factor-skewt" | "factorskewt" => Family::FactorSkewT,
            "clayton" => Family::Clayton,
            "gumbel" => Family::Gumbel,
            other => {
                return Err(Error::UnsupportedFamily {
                    family: other.to_string(),
                    reason: "expected one of \"factor\", \"clayton\", \"gumbel\"".to_string(),
                })
            }
        };
        let mut spec = match family {
            Family::FactorSkewT => DgpSpec::factor(1.0, t_len, n_cols),
            Family::Clayton => DgpSpec::clayton(1.0, t_len, n_cols),
            Family::Gumbel => DgpSpec::gumbel(2.0, t_len, n_cols),
        };
        let mut theta_post: Option<f64> = None;
        let mut s0: Option<f64> = None;
        if !rest.is_empty() {
            for item in rest.split(',') {
                let (key, value) = item.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "dgp item {item:?} is not of the form key=value"
                    ))
                })?;
                let parsed: f64 = value.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("dgp value {value:?} for {key:?} is not a number"))
                })?;
                match key.trim().to_ascii_lowercase().as_str() {
                    "theta0" | "theta" => spec.theta_pre = parsed,
                    "theta1" => theta_post = Some(parsed),
                    "s0" => s0 = Some(parsed),
                    "nu_inv" | "nuinv" => spec.nu_inv = parsed,
                    "lambda" | "lambda_skew" => spec.lambda_skew = parsed,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown dgp key {other:?}; expected theta0, theta1, s0, nu_inv or lambda"
                        )))
                    }
                }
            }
        }
        match s0 {
            Some(frac) => {
                spec.break_fraction = Some(frac);
                spec.theta_post = theta_post.unwrap_or(spec.theta_pre);
            }
            None => {
                spec.break_fraction = None;
                spec.theta_post = spec.theta_pre;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Check every parameter against its family's domain.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, value: f64, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                value,
                context: format!("{} dgp", self.family),
                reason: reason.to_string(),
            })
        };
        if self.t_len < 2 {
            return bad("T", self.t_len as f64, "at least 2 rows required");
        }
        if self.n_cols < 2 {
            return bad("N", self.n_cols as f64, "at least 2 columns required");
        }
        if let Some(s0) = self.break_fraction {
            if !(s0 > 0.0 && s0 < 1.0) {
                return bad("s0", s0, "break fraction must lie strictly inside (0, 1)");
            }
        }
        let thetas: &[f64] = if self.break_fraction.is_some() {
            &[self.theta_pre, self.theta_post]
        } else {
            &[self.theta_pre]
        };
        for &theta in thetas {
            match self.family {
                Family::FactorSkewT => {
                    if !theta.is_finite() {
                        return bad("theta", theta, "factor loading must be finite");
                    }
                }
                Family::Clayton => {
                    if theta <= 0.0 || theta.is_nan() {
                        return bad("theta", theta, "clayton parameter must be > 0");
                    }
                }
                Family::Gumbel => {
                    if theta < 1.0 || theta.is_nan() {
                        return bad("theta", theta, "gumbel parameter must be >= 1");
                    }
                }
            }
        }
        if self.family == Family::FactorSkewT {
            if !(self.nu_inv > 0.0 && self.nu_inv < 0.5) {
                return bad("nu_inv", self.nu_inv, "need 0 < nu_inv < 0.5 so dof > 2");
            }
            if !(self.lambda_skew > -1.0 && self.lambda_skew < 1.0) {
                return bad("lambda", self.lambda_skew, "skewness must lie in (-1, 1)");
            }
        }
        Ok(())
    }

    /// Index of the last pre-break row (`floor(s0 * T)` computed with an
    /// exact predicate, so fractions like 0.3 never round the wrong way);
    /// `None` without a break.
    pub fn break_row(&self) -> Option<usize> {
        self.break_fraction.map(|s0| max_rank_leq(self.t_len, s0) as usize)
    }

    /// Canonical string form, parseable by [`DgpSpec::parse`].
    pub fn render(&self) -> String {
        let mut s = format!("{}:theta0={}", self.family, self.theta_pre);
        if let Some(s0) = self.break_fraction {
            s.push_str(&format!(",theta1={},s0={}", self.theta_post, s0));
        }
        if self.family == Family::FactorSkewT {
            s.push_str(&format!(",nu_inv={},lambda={}", self.nu_inv, self.lambda_skew));
        }
        s
    }
}

/// Synthetic calendar: consecutive days from 2000-01-01. Simulated panels
/// need dates only as row labels.
pub(crate) fn synthetic_dates(t: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..t).map(|i| start + chrono::Duration::days(i as i64)).collect()
}

fn column_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

/// A uniform draw from the open interval (0, 1).
#[inline]
fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Hansen's standardized skew-t distribution: zero mean, unit variance,
/// degrees of freedom `nu > 2`, skewness parameter `lambda` in (-1, 1).
/// Sampling is by inverse transform through the piecewise Student-t
/// quantile map, which is exact and rejection-free.
#[derive(Debug, Clone)]
pub struct HansenSkewT {
    lambda: f64,
    a: f64,
    b: f64,
    scale: f64,
    student: StudentsT,
}

impl HansenSkewT {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        if nu <= 2.0 || nu.is_nan() {
            return Err(Error::InvalidParameter {
                name: "nu".to_string(),
                value: nu,
                context: "skew-t distribution".to_string(),
                reason: "degrees of freedom must exceed 2".to_string(),
            });
        }
        if !(lambda > -1.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter {
                name: "lambda".to_string(),
                value: lambda,
                context: "skew-t distribution".to_string(),
                reason: "skewness must lie in (-1, 1)".to_string(),
            });
        }
        let c = (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
            / (std::f64::consts::PI * (nu - 2.0)).sqrt();
        let a = 4.0 * lambda * c * (nu - 2.0) / (nu - 1.0);
        let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
        let student = StudentsT::new(0.0, 1.0, nu).expect("nu > 2 is a valid dof");
        Ok(HansenSkewT { lambda, a, b, scale: ((nu - 2.0) / nu).sqrt(), student })
    }

    /// Quantile function: maps `u` in (0, 1) to a draw.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let pivot = (1.0 - self.lambda) / 2.0;
        if u < pivot {
            let p = u / (1.0 - self.lambda);
            ((1.0 - self.lambda) * self.scale * self.student.inverse_cdf(p) - self.a) / self.b
        } else {
            let p = 0.5 + (u - pivot) / (1.0 + self.lambda);
            ((1.0 + self.lambda) * self.scale * self.student.inverse_cdf(p) - self.a) / self.b
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inverse_cdf(uniform_open(rng))
    }
}

/// Draw `n` i.i.d. values from Hansen's standardized skew-t.
pub fn sample_hansen_skewt<R: Rng + ?Sized>(
    nu: f64,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let dist = HansenSkewT::new(nu, lambda)?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

fn assemble(spec: &DgpSpec, data: Vec<f64>) -> Result<ResidualPanel> {
    Ok(ResidualPanel {
        dates: synthetic_dates(spec.t_len),
        names: column_names(spec.n_cols),
        values: Matrix::from_vec(data, spec.t_len, spec.n_cols)?,
        fits: None,
    })
}

/// Simulate the one-factor panel `eta_it = theta_t * Z_t + q_it` with a
/// fresh skew-t common factor per row and Student-t idiosyncratic noise
/// (non-standardized, variance `nu/(nu-2)`).
pub fn sample_factor_panel<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<ResidualPanel> {
    expect_family(spec, Family::FactorSkewT)?;
    spec.validate()?;
    let nu = 1.0 / spec.nu_inv;
    let factor = HansenSkewT::new(nu, spec.lambda_skew)?;
    let noise = StudentT::new(nu).expect("nu > 2 is a valid dof");
    let break_row = spec.break_row().unwrap_or(spec.t_len);
    let mut data = Vec::with_capacity(spec.t_len * spec.n_cols);
    for r in 0..spec.t_len {
        let theta = if r + 1 <= break_row { spec.theta_pre } else { spec.theta_post };
        let z = factor.sample(rng);
        for _ in 0..spec.n_cols {
            let q: f64 = noise.sample(rng);
            data.push(theta * z + q);
        }
    }
    assemble(spec, data)
}

/// Simulate exchangeable Clayton-copula rows by gamma frailty: with
/// `V ~ Gamma(1/theta, 1)` and unit exponentials `E_i`, the vector
/// `U_i = (1 + E_i/V)^{-1/theta}` has uniform margins and Clayton
/// dependence.
pub fn sample_clayton_panel<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<ResidualPanel> {
    expect_family(spec, Family::Clayton)?;
    spec.validate()?;
    let gamma_pre = rand_distr::Gamma::new(1.0 / spec.theta_pre, 1.0).expect("shape > 0");
    let gamma_post = rand_distr::Gamma::new(1.0 / spec.theta_post, 1.0).expect("shape > 0");
    let break_row = spec.break_row().unwrap_or(spec.t_len);
    let mut data = Vec::with_capacity(spec.t_len * spec.n_cols);
    for r in 0..spec.t_len {
        let (theta, frailty) = if r + 1 <= break_row {
            (spec.theta_pre, &gamma_pre)
        } else {
            (spec.theta_post, &gamma_post)
        };
        let v: f64 = frailty.sample(rng);
        for _ in 0..spec.n_cols {
            let e: f64 = Exp1.sample(rng);
            data.push((1.0 + e / v).powf(-1.0 / theta));
        }
    }
    assemble(spec, data)
}

/// Positive-stable draw with index `alpha` in (0, 1) and Laplace transform
/// `exp(-t^alpha)`, by the Chambers–Mallows–Stuck construction.
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let b = uniform_open(rng) * std::f64::consts::PI;
    let w: f64 = Exp1.sample(rng);
    let factor = ((1.0 - alpha) * b).sin() / w;
    ((alpha * b).sin() / b.sin().powf(1.0 / alpha)) * factor.powf((1.0 - alpha) / alpha)
}

/// Simulate exchangeable Gumbel-copula rows by positive-stable frailty:
/// `U_i = exp(-(E_i/V)^{1/theta})`. At `theta = 1` the copula degenerates
/// to independence and the rows are plain uniforms.
pub fn sample_gumbel_panel<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<ResidualPanel> {
    expect_family(spec, Family::Gumbel)?;
    spec.validate()?;
    let break_row = spec.break_row().unwrap_or(spec.t_len);
    let mut data = Vec::with_capacity(spec.t_len * spec.n_cols);
    for r in 0..spec.t_len {
        let theta = if r + 1 <= break_row { spec.theta_pre } else { spec.theta_post };
        if theta == 1.0 {
            for _ in 0..spec.n_cols {
                data.push(uniform_open(rng));
            }
        } else {
            let v = positive_stable(1.0 / theta, rng);
            for _ in 0..spec.n_cols {
                let e: f64 = Exp1.sample(rng);
                data.push((-(e / v).powf(1.0 / theta)).exp());
            }
        }
    }
    assemble(spec, data)
}

fn expect_family(spec: &DgpSpec, family: Family) -> Result<()> {
    if spec.family == family {
        Ok(())
    } else {
        Err(Error::UnsupportedFamily {
            family: spec.family.to_string(),
            reason: format!("this sampler handles the {family} family"),
        })
    }
}

/// Simulate a panel from `spec` with a fresh stream seeded by `seed`.
pub fn sample_panel(spec: &DgpSpec, seed: u64) -> Result<ResidualPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_panel_with(spec, &mut rng)
}

/// Simulate a panel from `spec` drawing from the given stream.
pub fn sample_panel_with<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<ResidualPanel> {
    match spec.family {
        Family::FactorSkewT => sample_factor_panel(spec, rng),
        Family::Clayton => sample_clayton_panel(spec, rng),
        Family::Gumbel => sample_gumbel_panel(spec, rng),
    }
}

/// Closed-form copula family for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopFamily {
    Clayton,
    Gumbel,
    Independence,
    Comonotone,
}

/// Population quantile dependence of a closed-form bivariate copula:
/// `C(q,q)/q` in the lower tail (`q <= 0.5`), `(1-2q+C(q,q))/(1-q)` in the
/// upper tail.
pub fn population_quantile_dep(family: PopFamily, theta: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange { level: q });
    }
    let diag = match family {
        PopFamily::Clayton => {
            if !(theta > 0.0) {
                return Err(Error::UnsupportedFamily {
                    family: "clayton".to_string(),
                    reason: format!("parameter {theta} outside the domain theta > 0"),
                });
            }
            (2.0 * q.powf(-theta) - 1.0).powf(-1.0 / theta)
        }
        PopFamily::Gumbel => {
            if !(theta >= 1.0) {
                return Err(Error::UnsupportedFamily {
                    family: "gumbel".to_string(),
                    reason: format!("parameter {theta} outside the domain theta >= 1"),
                });
            }
            q.powf(2.0_f64.powf(1.0 / theta))
        }
        // The degenerate families reduce algebraically to exact values
        // (C(q,q) = q^2 gives q and 1-q; C(q,q) = q gives 1 in both tails);
        // return them directly so calibration can pin them bit-exactly.
        PopFamily::Independence => return Ok(if q <= 0.5 { q } else { 1.0 - q }),
        PopFamily::Comonotone => return Ok(1.0),
    };
    Ok(if q <= 0.5 { diag / q } else { (1.0 - 2.0 * q + diag) / (1.0 - q) })
}
