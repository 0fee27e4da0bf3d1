//! Offspring and immigration laws.
//!
//! Every law is backed by a [`Table`]: exact pmf and survival values for the
//! head of the support plus a closed-form survival function for everything
//! beyond it. Sampling is inverse-survival: draw `u ∈ (0, 1]` and return the
//! smallest `k` with `P(X > k) < u`. Past the table the search runs on the
//! closed form, so the sampled tail is the true discrete tail all the way out.
//!
//! Offspring pgfs have the form `f(s) = s + (1 − s)^{1+α} ℓ_A` with ℓ_A
//! eventually constant:
//!
//! * `Slack(α, c)`: `f(s) = s + c (1 − s)^{1+α}`, so ℓ_A ≡ c.
//! * `PowerFractional(α)`: `f(s) = 1 − [(1 − s)^{−α} + 1]^{−1/α}`. Expanding
//!   in `u = 1 − s` gives `1 − f = u − u^{1+α}/α + O(u^{1+2α})`, so ℓ_A → 1/α.
//!   (It is 1/α, not α, and the exact α = ½ stationary law `1 − √(1 − s)` is
//!   only consistent with 1/α.)
//!
//! Immigration is either finite-mean (constant, Poisson, geometric) or
//! Sibuya(β) with `g(s) = 1 − (1 − s)^β`.

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{falling_binomial_coeff, gamma, ln_gamma, ln_gamma_ratio};

/// Longest cached head table.
pub const MAX_TABLE: usize = 8192;
/// Heavy-tailed tables stop early once `P(X > k)` falls below this.
pub const TABLE_TAIL_MASS: f64 = 1.0 / (1u64 << 40) as f64;
/// Light-tailed tables are built until the tail is negligible in f64.
const LIGHT_TAIL_MASS: f64 = 1.0e-300;
/// Largest value the tail search will return.
pub const MAX_SAMPLE: u64 = 1 << 63;
/// Sums over at most this many draws are done one draw at a time.
const DIRECT_SUM_LIMIT: u64 = 64;

/// Common surface of every integer-valued law in the crate.
pub trait DiscreteLaw: Send + Sync {
    fn pmf(&self, k: u64) -> f64;
    /// `P(X > k)`.
    fn survival(&self, k: u64) -> f64;
    fn pgf(&self, s: f64) -> f64;
    fn mean(&self) -> f64;
    fn sample(&self, rng: &mut RngStream) -> u64;
    /// Sum of `count` independent draws, saturating at `u64::MAX`.
    fn sum_iid(&self, count: u64, rng: &mut RngStream) -> u64 {
        let mut total = 0u64;
        for _ in 0..count {
            total = total.saturating_add(self.sample(rng));
        }
        total
    }
}

// ---------------------------------------------------------------------------
// Table + tail
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Tail {
    /// Support ends inside the table.
    Finite,
    Slack { alpha: f64, c: f64 },
    Sibuya { beta: f64 },
    /// Coefficients `binom(−1/α, j)` for `j = 1..`; see [`pf_series`].
    PowerFractional { alpha: f64, coeffs: Vec<f64> },
    Geometric { q: f64 },
    Poisson { mean: f64 },
}

impl Tail {
    fn survival(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Tail::Finite => 0.0,
            Tail::Slack { alpha, c } => {
                c * alpha / gamma(1.0 - alpha) * ln_gamma_ratio(kf, -alpha, 1.0).exp()
            }
            Tail::Sibuya { beta } => ln_gamma_ratio(kf, 1.0 - beta, 1.0).exp() / gamma(1.0 - beta),
            Tail::PowerFractional { alpha, coeffs } => pf_series(*alpha, 0.0, coeffs, k),
            Tail::Geometric { q } => q.powf(kf + 1.0),
            Tail::Poisson { mean } => gamma_lr(kf + 1.0, *mean),
        }
    }

    fn pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Tail::Finite => 0.0,
            Tail::Slack { alpha, c } => {
                c * alpha * (1.0 + alpha) / gamma(1.0 - alpha)
                    * ln_gamma_ratio(kf, -1.0 - alpha, 1.0).exp()
            }
            Tail::Sibuya { beta } => {
                beta / gamma(1.0 - beta) * ln_gamma_ratio(kf, -beta, 1.0).exp()
            }
            Tail::PowerFractional { alpha, coeffs } => -pf_series(*alpha, 1.0, coeffs, k),
            Tail::Geometric { q } => (1.0 - q) * q.powf(kf),
            Tail::Poisson { mean } => (kf * mean.ln() - mean - ln_gamma(kf + 1.0)).exp(),
        }
    }

    /// Power-law exponent of the survival function, used for the initial
    /// guess of the tail search.
    fn exponent(&self) -> Option<f64> {
        match self {
            Tail::Slack { alpha, .. } | Tail::PowerFractional { alpha, .. } => Some(1.0 + alpha),
            Tail::Sibuya { beta } => Some(*beta),
            _ => None,
        }
    }
}

/// `Σ_j binom(−1/α, j) [s^k] (1 − s)^{shift + αj}` summed as an asymptotic
/// series in `k^{−α}`; stops at the first negligible or growing term.
///
/// With `shift = 0` this is `P(X > k)` (the tail generating function of the
/// power-fractional law is `(1 + (1 − s)^α)^{−1/α}`); with `shift = 1` it is
/// `−p_k` for `k ≥ 2`.
fn pf_series(alpha: f64, shift: f64, coeffs: &[f64], k: u64) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for (j, c) in coeffs.iter().enumerate() {
        let a = shift + alpha * (j + 1) as f64;
        let term = c * falling_binomial_coeff(a, k);
        if term == 0.0 {
            // αj hit an integer: a polynomial term with no coefficient at k.
            continue;
        }
        if term.abs() > last && j > 2 {
            break;
        }
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        last = term.abs();
    }
    sum
}

#[derive(Debug, Clone)]
struct Table {
    pmf: Vec<f64>,
    /// `surv[k] = P(X > k)`.
    surv: Vec<f64>,
    tail: Tail,
}

impl Table {
    fn pmf(&self, k: u64) -> f64 {
        match self.pmf.get(k as usize) {
            Some(&p) => p,
            None => self.tail.pmf(k),
        }
    }

    fn survival(&self, k: u64) -> f64 {
        match self.surv.get(k as usize) {
            Some(&s) => s,
            None => self.tail.survival(k),
        }
    }

    /// Smallest `k ≥ from` with `P(X > k) < u`, given `P(X > from − 1) ≥ u`.
    #[inline]
    fn inverse_from(&self, u: f64, from: usize) -> u64 {
        let s = &self.surv;
        let end = s.len();
        let lin_end = (from + 4).min(end);
        let mut k = from;
        while k < lin_end {
            if s[k] < u {
                return k as u64;
            }
            k += 1;
        }
        if k < end && s[end - 1] < u {
            return (k + s[k..].partition_point(|&v| v >= u)) as u64;
        }
        self.tail_inverse(u)
    }

    #[inline]
    fn inverse(&self, u: f64) -> u64 {
        self.inverse_from(u, 0)
    }

    /// Tail search past the table. Log-log interpolation with a bisection
    /// step every third round; the survival is close to a power law there,
    /// so this usually finishes in a handful of evaluations.
    fn tail_inverse(&self, u: f64) -> u64 {
        let mut lo = (self.surv.len() - 1) as u64;
        if matches!(self.tail, Tail::Finite) {
            return lo + 1;
        }
        let mut s_lo = self.surv[lo as usize];
        let mut hi = match self.tail.exponent() {
            Some(a) => {
                let guess = (lo as f64).max(1.0) * (s_lo / u).powf(1.0 / a) * 1.05 + 2.0;
                (guess.min(MAX_SAMPLE as f64) as u64).max(lo + 1)
            }
            None => lo.saturating_mul(2).max(lo + 1),
        };
        let mut s_hi = self.tail.survival(hi);
        while s_hi >= u {
            if hi >= MAX_SAMPLE {
                return MAX_SAMPLE;
            }
            lo = hi;
            s_lo = s_hi;
            hi = hi.saturating_mul(2).min(MAX_SAMPLE);
            s_hi = self.tail.survival(hi);
        }
        let ln_u = u.ln();
        let mut round = 0u32;
        while hi - lo > 1 {
            let mid = if round % 3 == 2 || s_hi <= 0.0 || lo == 0 {
                lo + (hi - lo) / 2
            } else {
                let (xl, xh) = ((lo as f64).ln(), (hi as f64).ln());
                let (yl, yh) = (s_lo.ln(), s_hi.ln());
                let x = xl + (ln_u - yl) * (xh - xl) / (yh - yl);
                let m = x.exp();
                if m.is_finite() {
                    (m as u64).clamp(lo + 1, hi - 1)
                } else {
                    lo + (hi - lo) / 2
                }
            };
            let s_mid = self.tail.survival(mid);
            if s_mid < u {
                hi = mid;
                s_hi = s_mid;
            } else {
                lo = mid;
                s_lo = s_mid;
            }
            round += 1;
        }
        hi
    }

    #[inline]
    fn sample(&self, rng: &mut RngStream) -> u64 {
        self.inverse(rng.uniform_open_closed())
    }

    /// Exact sum of `count` iid draws.
    ///
    /// Small counts draw one value at a time. Large counts split the draws
    /// into table categories with conditional binomials (the multinomial
    /// occupation numbers `N_0, N_1, …`), stopping once few draws remain;
    /// those are sampled individually from the law conditioned on exceeding
    /// the last category. Nothing is approximated, only reordered.
    fn sum_iid(&self, count: u64, rng: &mut RngStream) -> u64 {
        if count <= DIRECT_SUM_LIMIT {
            let mut total = 0u64;
            for _ in 0..count {
                total = total.saturating_add(self.sample(rng));
            }
            return total;
        }
        let mut remaining = count;
        let mut total = 0u64;
        let mut above = 1.0; // P(X ≥ k)
        let mut k = 0usize;
        while k < self.pmf.len() && remaining > DIRECT_SUM_LIMIT.max(k as u64) {
            let p = (self.pmf[k] / above).clamp(0.0, 1.0);
            let n_k = if p >= 1.0 {
                remaining
            } else if p <= 0.0 {
                0
            } else {
                Binomial::new(remaining, p)
                    .expect("binomial parameters are in range")
                    .sample(rng)
            };
            total = total.saturating_add((k as u64).saturating_mul(n_k));
            remaining -= n_k;
            above = self.surv[k];
            k += 1;
            if above <= 0.0 {
                break;
            }
        }
        for _ in 0..remaining {
            let u = rng.uniform_open_closed() * above;
            total = total.saturating_add(self.inverse_from(u, k));
        }
        total
    }
}

// ---------------------------------------------------------------------------
// Offspring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OffspringKind {
    Slack { alpha: f64, c: f64 },
    PowerFractional { alpha: f64 },
}

/// Critical offspring law with `f(s) = s + (1 − s)^{1+α} ℓ_A(1/(1 − s))`.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    kind: OffspringKind,
    table: Table,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

impl OffspringLaw {
    pub fn new(kind: OffspringKind) -> Result<Self> {
        let table = match kind {
            OffspringKind::Slack { alpha, c } => {
                check_alpha(alpha)?;
                let c_max = 1.0 / (1.0 + alpha);
                if !(c > 0.0 && c <= c_max * (1.0 + 1e-12)) {
                    return Err(Error::ParameterDomain(format!(
                        "slack c must lie in (0, 1/(1+alpha)] = (0, {c_max}], got {c}"
                    )));
                }
                slack_table(alpha, c.min(c_max))
            }
            OffspringKind::PowerFractional { alpha } => {
                check_alpha(alpha)?;
                power_fractional_table(alpha)
            }
        };
        Ok(Self { kind, table })
    }

    pub fn slack(alpha: f64, c: f64) -> Result<Self> {
        Self::new(OffspringKind::Slack { alpha, c })
    }

    pub fn power_fractional(alpha: f64) -> Result<Self> {
        Self::new(OffspringKind::PowerFractional { alpha })
    }

    pub fn kind(&self) -> OffspringKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        match self.kind {
            OffspringKind::Slack { alpha, .. } | OffspringKind::PowerFractional { alpha } => alpha,
        }
    }

    /// Limit of the slowly varying factor ℓ_A: `c` for Slack, `1/α` for the
    /// power-fractional family.
    pub fn ell_a(&self) -> f64 {
        match self.kind {
            OffspringKind::Slack { c, .. } => c,
            OffspringKind::PowerFractional { alpha } => 1.0 / alpha,
        }
    }

    /// Number of cached head entries.
    pub fn table_len(&self) -> usize {
        self.table.pmf.len()
    }

    /// `1 − f(1 − u)`.
    pub fn one_minus_f(&self, u: f64) -> f64 {
        match self.kind {
            OffspringKind::Slack { alpha, c } => u - c * u.powf(1.0 + alpha),
            OffspringKind::PowerFractional { alpha } => {
                u * (-(u.powf(alpha)).ln_1p() / alpha).exp()
            }
        }
    }

    /// `f(s) − s` at `s = 1 − u`, computed without cancellation.
    pub fn f_minus_s(&self, u: f64) -> f64 {
        match self.kind {
            OffspringKind::Slack { alpha, c } => c * u.powf(1.0 + alpha),
            OffspringKind::PowerFractional { alpha } => {
                -u * (-(u.powf(alpha)).ln_1p() / alpha).exp_m1()
            }
        }
    }

    /// `1 − f(1 − u)` for complex `u` with `Re u > 0` (principal branches).
    pub fn one_minus_f_complex(&self, u: Complex64) -> Complex64 {
        match self.kind {
            OffspringKind::Slack { alpha, c } => u - c * u.powf(1.0 + alpha),
            OffspringKind::PowerFractional { alpha } => {
                u * (-ln1p_complex(u.powf(alpha)) / alpha).exp()
            }
        }
    }

    pub fn pgf_complex(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        one - self.one_minus_f_complex(one - s)
    }
}

fn slack_table(alpha: f64, c: f64) -> Table {
    let pmf = vec![c, (1.0 - c * (1.0 + alpha)).max(0.0), c * alpha * (1.0 + alpha) / 2.0];
    // P(X > k) = p_{k+1} (k + 1) / (1 + α) for k ≥ 1.
    ratio_table(pmf, vec![1.0 - c], 1.0 + alpha, Tail::Slack { alpha, c })
}

/// Extends `pmf` with `p_{k+1} = p_k (k − shape) / (k + 1)` and fills `surv[k] = p_{k+1} (k + 1) / shape` until the table is full or
/// the remaining mass drops below [`TABLE_TAIL_MASS`].
fn ratio_table(mut pmf: Vec<f64>, mut surv: Vec<f64>, shape: f64, tail: Tail) -> Table {
    loop {
        let k = surv.len();
        while pmf.len() <= k + 1 {
            let j = pmf.len() - 1;
            pmf.push(pmf[j] * (j as f64 - shape) / (j as f64 + 1.0));
        }
        let s = pmf[k + 1] * (k as f64 + 1.0) / shape;
        surv.push(s);
        if surv.len() >= MAX_TABLE || s < TABLE_TAIL_MASS {
            break;
        }
    }
    pmf.truncate(surv.len());
    Table { pmf, surv, tail }
}

/// Survival table of the power-fractional law from its tail generating
/// function `H = (1 + w)^{−1/α}` with `w = (1 − s)^α`, via the J.C.P. Miller
/// power recurrence `k F_0 H_k = Σ_j ((γ + 1) j − k) F_j H_{k−j}`. Here every
/// term of the sum is nonnegative, so the recurrence is free of cancellation.
fn power_fractional_table(alpha: f64) -> Table {
    let n = MAX_TABLE;
    let gamma_pow = -1.0 / alpha;
    let mut w = vec![0.0; n];
    w[0] = 1.0;
    for j in 1..n {
        w[j] = w[j - 1] * (j as f64 - 1.0 - alpha) / j as f64;
    }
    let mut h = vec![0.0; n];
    h[0] = 2f64.powf(gamma_pow);
    for k in 1..n {
        let kf = k as f64;
        let mut acc = 0.0;
        for j in 1..=k {
            acc += ((gamma_pow + 1.0) * j as f64 - kf) * w[j] * h[k - j];
        }
        h[k] = acc / (2.0 * kf);
    }
    let mut pmf = Vec::with_capacity(n);
    pmf.push(1.0 - h[0]);
    for k in 1..n {
        pmf.push(h[k - 1] - h[k]);
    }
    let coeffs = pf_coeffs(alpha);
    Table {
        pmf,
        surv: h,
        tail: Tail::PowerFractional { alpha, coeffs },
    }
}

/// `binom(−1/α, j)` for `j = 1..=40`.
fn pf_coeffs(alpha: f64) -> Vec<f64> {
    let g = -1.0 / alpha;
    let mut out = Vec::with_capacity(40);
    let mut c = 1.0;
    for j in 1..=40 {
        c *= (g - (j as f64 - 1.0)) / j as f64;
        out.push(c);
    }
    out
}

impl DiscreteLaw for OffspringLaw {
    fn pmf(&self, k: u64) -> f64 {
        self.table.pmf(k)
    }

    fn survival(&self, k: u64) -> f64 {
        self.table.survival(k)
    }

    fn pgf(&self, s: f64) -> f64 {
        1.0 - self.one_minus_f(1.0 - s)
    }

    fn mean(&self) -> f64 {
        1.0
    }

    fn sample(&self, rng: &mut RngStream) -> u64 {
        self.table.sample(rng)
    }

    fn sum_iid(&self, count: u64, rng: &mut RngStream) -> u64 {
        self.table.sum_iid(count, rng)
    }
}

// ---------------------------------------------------------------------------
// Immigration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ImmigrationKind {
    Constant { b: u64 },
    Poisson { mean: f64 },
    /// Failures before the first success, `P(B = k) = p (1 − p)^k`.
    Geometric { p: f64 },
    Sibuya { beta: f64 },
}

#[derive(Debug, Clone)]
pub struct ImmigrationLaw {
    kind: ImmigrationKind,
    table: Table,
}

impl ImmigrationLaw {
    pub fn new(kind: ImmigrationKind) -> Result<Self> {
        let table = match kind {
            ImmigrationKind::Constant { b } => {
                if b as usize >= MAX_TABLE {
                    return Err(Error::ParameterDomain(format!(
                        "constant immigration must be below {MAX_TABLE}, got {b}"
                    )));
                }
                let n = b as usize + 1;
                let mut pmf = vec![0.0; n];
                pmf[b as usize] = 1.0;
                let mut surv = vec![1.0; n];
                surv[b as usize] = 0.0;
                Table {
                    pmf,
                    surv,
                    tail: Tail::Finite,
                }
            }
            ImmigrationKind::Poisson { mean } => {
                if !(mean > 0.0 && mean < 1.0e6) {
                    return Err(Error::ParameterDomain(format!(
                        "poisson mean must lie in (0, 1e6), got {mean}"
                    )));
                }
                light_table(Tail::Poisson { mean })
            }
            ImmigrationKind::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::ParameterDomain(format!(
                        "geometric p must lie in (0, 1), got {p}"
                    )));
                }
                light_table(Tail::Geometric { q: 1.0 - p })
            }
            ImmigrationKind::Sibuya { beta } => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::ParameterDomain(format!(
                        "sibuya beta must lie in (0, 1), got {beta}"
                    )));
                }
                sibuya_table(beta)
            }
        };
        Ok(Self { kind, table })
    }

    pub fn constant(b: u64) -> Result<Self> {
        Self::new(ImmigrationKind::Constant { b })
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        Self::new(ImmigrationKind::Poisson { mean })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(ImmigrationKind::Geometric { p })
    }

    pub fn sibuya(beta: f64) -> Result<Self> {
        Self::new(ImmigrationKind::Sibuya { beta })
    }

    pub fn kind(&self) -> ImmigrationKind {
        self.kind
    }

    pub fn is_finite_mean(&self) -> bool {
        !matches!(self.kind, ImmigrationKind::Sibuya { .. })
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            ImmigrationKind::Sibuya { beta } => Some(beta),
            _ => None,
        }
    }

    /// Limit of ℓ_B; exactly 1 for Sibuya.
    pub fn ell_b(&self) -> Option<f64> {
        self.beta().map(|_| 1.0)
    }

    /// Smallest support point.
    pub fn atom(&self) -> u64 {
        match self.kind {
            ImmigrationKind::Constant { b } => b,
            ImmigrationKind::Sibuya { .. } => 1,
            ImmigrationKind::Poisson { .. } | ImmigrationKind::Geometric { .. } => 0,
        }
    }

    /// `(index, constant)` with `P(B > x) ~ constant · x^{−index}`.
    pub fn tail_params(&self) -> Result<(f64, f64)> {
        match self.kind {
            ImmigrationKind::Sibuya { beta } => Ok((beta, 1.0 / gamma(1.0 - beta))),
            other => Err(Error::NotHeavyTailed(format!("{other:?} has finite mean"))),
        }
    }

    /// `1 − g(1 − u)`.
    pub fn one_minus_g(&self, u: f64) -> f64 {
        match self.kind {
            ImmigrationKind::Constant { b } => -((b as f64) * (-u).ln_1p()).exp_m1(),
            ImmigrationKind::Poisson { mean } => -(-mean * u).exp_m1(),
            ImmigrationKind::Geometric { p } => {
                let q = 1.0 - p;
                q * u / (p + q * u)
            }
            ImmigrationKind::Sibuya { beta } => u.powf(beta),
        }
    }

    pub fn one_minus_g_complex(&self, u: Complex64) -> Complex64 {
        match self.kind {
            ImmigrationKind::Constant { b } => -expm1_complex(ln1p_complex(-u) * b as f64),
            ImmigrationKind::Poisson { mean } => -expm1_complex(-u * mean),
            ImmigrationKind::Geometric { p } => {
                let q = 1.0 - p;
                u * q / (u * q + p)
            }
            ImmigrationKind::Sibuya { beta } => u.powf(beta),
        }
    }

    pub fn pgf_complex(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        one - self.one_minus_g_complex(one - s)
    }
}

fn sibuya_table(beta: f64) -> Table {
    // P(B > k) = p_{k+1} (k + 1) / β.
    ratio_table(vec![0.0, beta], Vec::new(), beta, Tail::Sibuya { beta })
}

fn light_table(tail: Tail) -> Table {
    let mut pmf = Vec::new();
    let mut surv = Vec::new();
    let mut k = 0u64;
    loop {
        pmf.push(tail.pmf(k));
        let s = tail.survival(k);
        surv.push(s);
        if (s < LIGHT_TAIL_MASS && pmf.len() > 1) || pmf.len() >= MAX_TABLE {
            break;
        }
        k += 1;
    }
    Table { pmf, surv, tail }
}

impl DiscreteLaw for ImmigrationLaw {
    fn pmf(&self, k: u64) -> f64 {
        self.table.pmf(k)
    }

    fn survival(&self, k: u64) -> f64 {
        self.table.survival(k)
    }

    fn pgf(&self, s: f64) -> f64 {
        1.0 - self.one_minus_g(1.0 - s)
    }

    fn mean(&self) -> f64 {
        match self.kind {
            ImmigrationKind::Constant { b } => b as f64,
            ImmigrationKind::Poisson { mean } => mean,
            ImmigrationKind::Geometric { p } => (1.0 - p) / p,
            ImmigrationKind::Sibuya { .. } => f64::INFINITY,
        }
    }

    fn sample(&self, rng: &mut RngStream) -> u64 {
        self.table.sample(rng)
    }

    fn sum_iid(&self, count: u64, rng: &mut RngStream) -> u64 {
        self.table.sum_iid(count, rng)
    }
}

/// Point mass, used as a degenerate stub and as a fixed random-sum count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass(pub u64);

impl DiscreteLaw for PointMass {
    fn pmf(&self, k: u64) -> f64 {
        if k == self.0 {
            1.0
        } else {
            0.0
        }
    }

    fn survival(&self, k: u64) -> f64 {
        if k < self.0 {
            1.0
        } else {
            0.0
        }
    }

    fn pgf(&self, s: f64) -> f64 {
        s.powi(self.0 as i32)
    }

    fn mean(&self) -> f64 {
        self.0 as f64
    }

    fn sample(&self, _rng: &mut RngStream) -> u64 {
        self.0
    }

    fn sum_iid(&self, count: u64, _rng: &mut RngStream) -> u64 {
        count.saturating_mul(self.0)
    }
}

// ---------------------------------------------------------------------------
// complex helpers
// ---------------------------------------------------------------------------

pub(crate) fn ln1p_complex(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // z − z²/2 + z³/3 − …, error below |z|^8 / 8
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pow = z;
        for n in 1..=7 {
            let term = pow / n as f64;
            acc += if n % 2 == 1 { term } else { -term };
            pow *= z;
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}

pub(crate) fn expm1_complex(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = z;
        for n in 1..=7 {
            acc += term;
            term = term * z / (n + 1) as f64;
        }
        acc
    } else {
        z.exp() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;

    fn slack_half() -> OffspringLaw {
        OffspringLaw::slack(0.5, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn slack_pmf_examples() {
        let law = slack_half();
        assert!((law.pmf(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(law.pmf(1).abs() < 1e-15);
        assert!((law.pmf(2) - 0.25).abs() < 1e-15);
        assert!((law.pmf(3) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn slack_rejects_negative_p1() {
        assert!(matches!(
            OffspringLaw::slack(0.5, 0.6667),
            Err(Error::ParameterDomain(_))
        ));
        assert!(OffspringLaw::slack(0.0, 0.5).is_err());
        assert!(OffspringLaw::slack(1.0, 0.4).is_err());
    }

    #[test]
    fn slack_ratio_recursion_holds_through_the_tail() {
        let law = OffspringLaw::slack(0.3, 0.5).unwrap();
        for k in [2u64, 10, 100, 8190, 8191, 8192, 8193, 50_000] {
            let lhs = law.pmf(k + 1);
            let rhs = law.pmf(k) * (k as f64 - 1.3) / (k as f64 + 1.0);
            assert!((lhs / rhs - 1.0).abs() < 1e-9, "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn table_and_closed_form_tail_agree_at_the_seam() {
        let slack = OffspringLaw::slack(0.3, 0.5).unwrap();
        let sib = ImmigrationLaw::sibuya(0.8).unwrap();
        let pf = OffspringLaw::power_fractional(0.5).unwrap();
        for k in [100u64, 1000, 4000] {
            let a = slack.table.surv[k as usize];
            let b = slack.table.tail.survival(k);
            assert!((a / b - 1.0).abs() < 1e-10, "slack k={k}");
            if (k as usize) < sib.table.surv.len() {
                let a = sib.table.surv[k as usize];
                let b = sib.table.tail.survival(k);
                assert!((a / b - 1.0).abs() < 1e-10, "sibuya k={k}");
            }
            let a = pf.table.surv[k as usize];
            let b = pf.table.tail.survival(k);
            assert!((a / b - 1.0).abs() < 1e-9, "pf k={k}: {a} vs {b}");
            let a = pf.table.pmf[k as usize];
            let b = pf.table.tail.pmf(k);
            assert!((a / b - 1.0).abs() < 1e-6, "pf pmf k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn power_fractional_head() {
        let pf = OffspringLaw::power_fractional(0.5).unwrap();
        assert!((pf.pmf(0) - 0.75).abs() < 1e-15);
        assert!((pf.pmf(1) - 0.125).abs() < 1e-15);
        assert!((pf.pgf(0.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sibuya_examples() {
        let b = ImmigrationLaw::sibuya(0.8).unwrap();
        assert_eq!(b.pmf(0), 0.0);
        assert!((b.pmf(1) - 0.8).abs() < 1e-15);
        assert!((b.pmf(2) - 0.8 * 0.2 / 2.0).abs() < 1e-15);
        assert!((b.pgf(0.5) - (1.0 - 0.5f64.powf(0.8))).abs() < 1e-15);
        assert!((b.pgf(0.5) - 0.425_651).abs() < 1e-6);
        let (idx, c) = b.tail_params().unwrap();
        assert_eq!(idx, 0.8);
        assert!((c - 0.217_824_884_211_667).abs() < 1e-12);
        let (_, c) = ImmigrationLaw::sibuya(0.5).unwrap().tail_params().unwrap();
        assert!((c - 0.564_189_583_547_756).abs() < 1e-12);
        assert!(matches!(
            ImmigrationLaw::poisson(2.0).unwrap().tail_params(),
            Err(Error::NotHeavyTailed(_))
        ));
    }

    #[test]
    fn constant_and_atoms() {
        let c = ImmigrationLaw::constant(1).unwrap();
        assert_eq!(c.pmf(1), 1.0);
        assert_eq!(c.pmf(0), 0.0);
        let mut rng = seed_stream(3, 0);
        for _ in 0..100 {
            assert_eq!(c.sample(&mut rng), 1);
        }
        assert_eq!(c.atom(), 1);
        assert_eq!(ImmigrationLaw::poisson(2.0).unwrap().atom(), 0);
        assert_eq!(c.sum_iid(1000, &mut rng), 1000);
    }

    #[test]
    fn pgf_examples() {
        let pf = OffspringLaw::power_fractional(0.5).unwrap();
        assert!((pf.pgf(0.0) - 0.75).abs() < 1e-15);
        assert_eq!(slack_half().pgf(1.0), 1.0);
    }

    #[test]
    fn geometric_and_poisson_tables() {
        let g = ImmigrationLaw::geometric(0.4).unwrap();
        assert!((g.pmf(3) - 0.4 * 0.6f64.powi(3)).abs() < 1e-15);
        assert!((g.mean() - 1.5).abs() < 1e-15);
        let p = ImmigrationLaw::poisson(2.0).unwrap();
        let tot: f64 = (0..40).map(|k| p.pmf(k)).sum();
        assert!((tot - 1.0).abs() < 1e-14);
        assert!((p.survival(3) - (1.0 - (0..=3).map(|k| p.pmf(k)).sum::<f64>())).abs() < 1e-14);
    }

    #[test]
    fn tail_search_respects_survival() {
        let law = OffspringLaw::slack(0.3, 0.5).unwrap();
        for &u in &[1e-6, 3.3e-9, 1e-12, 2e-16] {
            let k = law.table.inverse(u);
            assert!(law.survival(k) < u, "u={u} k={k}");
            assert!(law.survival(k - 1) >= u, "u={u} k={k}");
        }
        let sib = ImmigrationLaw::sibuya(0.8).unwrap();
        for &u in &[1e-9, 1e-14] {
            let k = sib.table.inverse(u);
            assert!(sib.survival(k) < u && sib.survival(k - 1) >= u);
        }
        let pf = OffspringLaw::power_fractional(0.7).unwrap();
        for &u in &[1e-7, 1e-13] {
            let k = pf.table.inverse(u);
            assert!(pf.survival(k) < u && pf.survival(k - 1) >= u);
        }
    }

    fn gof(law: &dyn DiscreteLaw, draws: u64, seed: u64) -> crate::stats::ChiSquare {
        let mut rng = seed_stream(seed, 0);
        let mut counts = vec![0u64; 21];
        for _ in 0..draws {
            let x = law.sample(&mut rng);
            if x <= 20 {
                counts[x as usize] += 1;
            }
        }
        // Skip empty categories (e.g. p_1 = 0) so the χ² cells are well defined.
        let (c, p): (Vec<u64>, Vec<f64>) = (0..=20u64)
            .filter(|&k| law.pmf(k) > 0.0)
            .map(|k| (counts[k as usize], law.pmf(k)))
            .unzip();
        crate::stats::chi_square_gof(&c, &p, draws)
    }

    #[test]
    fn samplers_pass_chi_square() {
        let laws: Vec<Box<dyn DiscreteLaw>> = vec![
            Box::new(slack_half()),
            Box::new(OffspringLaw::slack(0.3, 0.5).unwrap()),
            Box::new(OffspringLaw::power_fractional(0.5).unwrap()),
            Box::new(OffspringLaw::power_fractional(0.3).unwrap()),
            Box::new(ImmigrationLaw::sibuya(0.8).unwrap()),
            Box::new(ImmigrationLaw::poisson(2.0).unwrap()),
            Box::new(ImmigrationLaw::geometric(0.3).unwrap()),
        ];
        for (i, law) in laws.iter().enumerate() {
            let c = gof(law.as_ref(), 1_000_000, 100 + i as u64);
            assert!(c.passes(1e-3), "law {i}: {c:?}");
        }
    }

    #[test]
    fn slack_zero_frequency() {
        let law = slack_half();
        let mut rng = seed_stream(11, 0);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| law.sample(&mut rng) == 0).count() as f64;
        let p = 2.0 / 3.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn sibuya_truncated_mean_keeps_growing() {
        let law = ImmigrationLaw::sibuya(0.8).unwrap();
        let mut rng = seed_stream(12, 0);
        let draws: Vec<u64> = (0..1_000_000).map(|_| law.sample(&mut rng)).collect();
        let m = |cap: u64| draws.iter().map(|&b| b.min(cap) as f64).sum::<f64>() / draws.len() as f64;
        // E min(B, M) grows like M^{1−β}; 10^3 → 10^6 multiplies it by roughly 4.
        assert!(m(1_000_000) > 2.5 * m(1_000));
    }

    #[test]
    fn pmf_sums_to_one_and_table_covers_mass() {
        for law in [
            OffspringLaw::slack(0.5, 0.5).unwrap(),
            OffspringLaw::power_fractional(0.5).unwrap(),
        ] {
            let n = law.table_len() as u64;
            let head: f64 = (0..n).map(|k| law.pmf(k)).sum();
            assert!((head + law.survival(n - 1) - 1.0).abs() < 1e-12);
        }
        let sib = ImmigrationLaw::sibuya(0.8).unwrap();
        let n = sib.table.pmf.len() as u64;
        let head: f64 = (0..n).map(|k| sib.pmf(k)).sum();
        assert!((head + sib.survival(n - 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_pgf_matches_pmf_series() {
        let laws: Vec<Box<dyn DiscreteLaw>> = vec![
            Box::new(slack_half()),
            Box::new(OffspringLaw::slack(0.3, 0.5).unwrap()),
            Box::new(OffspringLaw::power_fractional(0.3).unwrap()),
            Box::new(OffspringLaw::power_fractional(0.7).unwrap()),
            Box::new(ImmigrationLaw::sibuya(0.8).unwrap()),
            Box::new(ImmigrationLaw::poisson(2.0).unwrap()),
        ];
        for law in &laws {
            for &s in &[0.1, 0.5, 0.9] {
                let series: f64 = (0..4000u64).map(|k| law.pmf(k) * f64::powi(s, k as i32)).sum();
                assert!((series - law.pgf(s)).abs() < 1e-9, "s={s}");
            }
        }
    }

    #[test]
    fn criticality_deficit_is_ell_times_h_pow_alpha() {
        for alpha in [0.3, 0.5, 0.7] {
            for law in [
                OffspringLaw::slack(alpha, 0.5).unwrap(),
                OffspringLaw::power_fractional(alpha).unwrap(),
            ] {
                let h = 1e-16;
                let ratio = law.one_minus_f(h) / h;
                assert!(ratio <= 1.0 && ratio >= 1.0 - 1e-4, "{law:?}: {ratio}");
                let h = 1e-12;
                let deficit = 1.0 - law.one_minus_f(h) / h;
                let model = law.ell_a() * h.powf(alpha);
                assert!((deficit / model - 1.0).abs() < 0.02, "alpha={alpha}");
            }
        }
    }

    #[test]
    fn pgf_exceeds_identity_inside_unit_interval() {
        for law in [
            OffspringLaw::slack(0.3, 0.5).unwrap(),
            OffspringLaw::power_fractional(0.7).unwrap(),
        ] {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                assert!(law.f_minus_s(u) > 0.0);
            }
        }
    }

    #[test]
    fn slack_boundary_c_has_no_mass_at_one() {
        let law = OffspringLaw::slack(0.4, 1.0 / 1.4).unwrap();
        assert_eq!(law.pmf(1), 0.0);
    }

    fn bins(values: &[u64], edges: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; edges.len() + 1];
        for &v in values {
            out[edges.partition_point(|&e| e <= v)] += 1;
        }
        out
    }

    #[test]
    fn bulk_sum_matches_one_at_a_time() {
        let laws: Vec<Box<dyn DiscreteLaw>> = vec![
            Box::new(slack_half()),
            Box::new(OffspringLaw::power_fractional(0.3).unwrap()),
            Box::new(ImmigrationLaw::sibuya(0.8).unwrap()),
        ];
        for (i, law) in laws.iter().enumerate() {
            for &count in &[100u64, 3000] {
                let reps = 20_000;
                let mut r1 = seed_stream(500 + i as u64, 1);
                let mut r2 = seed_stream(500 + i as u64, 2);
                let fast: Vec<u64> = (0..reps).map(|_| law.sum_iid(count, &mut r1)).collect();
                let slow: Vec<u64> = (0..reps)
                    .map(|_| (0..count).fold(0u64, |a, _| a.saturating_add(law.sample(&mut r2))))
                    .collect();
                let mut sorted = slow.clone();
                sorted.sort_unstable();
                let edges: Vec<u64> = (1..20).map(|j| sorted[j * reps / 20]).collect();
                let c = crate::stats::chi_square_two_sample(&bins(&fast, &edges), &bins(&slow, &edges));
                assert!(c.passes(1e-3), "law {i} count {count}: {c:?}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn survival_is_monotone(alpha in 0.05f64..0.95, frac in 0.05f64..1.0, k in 0u64..100_000) {
            let law = OffspringLaw::slack(alpha, frac / (1.0 + alpha)).unwrap();
            let s0 = law.survival(k);
            let s1 = law.survival(k + 1);
            proptest::prop_assert!(s1 <= s0 * (1.0 + 1e-12));
            proptest::prop_assert!((0.0..=1.0).contains(&law.pmf(k)));
        }
    }
}
