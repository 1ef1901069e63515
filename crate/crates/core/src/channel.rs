//! Discrete partial-response channel, SNR bookkeeping, and extraction of the
//! per-bit fields and pairwise couplings from a received block.
//!
//! The block log-likelihood is taken as
//! `-(c/2) * sum_t (y_t - sum_j h_j x_{t-j})^2` where the precision `c` is
//! `s^2` in [`Convention::Paper`] and `1/sigma^2` in [`Convention::Exact`].
//! Expanding the square gives, up to an x-independent constant,
//!
//! ```text
//! sum_i u_i x_i - sum_{a<b, b-a=p<=L} Q_p x_a x_b
//! u_i = c * sum_j h_j y_{i+j}
//! Q_p = c * sum_{k=0}^{L-p} h_k h_{k+p}
//! ```
//!
//! Pairs that reach into the known padding on either side contribute
//! `-Q_p * pad` to the field of the unknown endpoint.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// PR polynomial `h(D) = h_0 + h_1 D + ... + h_L D^L` with `h_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrTarget {
    coeffs: Vec<f64>,
}

impl PrTarget {
    /// Trailing zero coefficients are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::Target("no coefficients".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Target("non-finite coefficient".into()));
        }
        if coeffs[0] != 1.0 {
            return Err(Error::Target(format!("h_0 must be 1, got {}", coeffs[0])));
        }
        Ok(PrTarget { coeffs })
    }

    pub fn memoryless() -> Self {
        PrTarget { coeffs: vec![1.0] }
    }

    pub fn dicode() -> Self {
        PrTarget { coeffs: vec![1.0, -1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// ISI length L.
    pub fn isi_len(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|h| h * h).sum()
    }

    /// `sum_{k=0}^{L-p} h_k h_{k+p}`
    pub fn autocorrelation(&self, p: usize) -> f64 {
        let l = self.isi_len();
        if p > l {
            return 0.0;
        }
        (0..=l - p).map(|k| self.coeffs[k] * self.coeffs[k + p]).sum()
    }

    /// True when the target has the form `1 - alpha D^n` with `|alpha| <= 1`
    /// (including `alpha = 0`): the pairwise message-passing equations are
    /// exact on its loop-free ISI graph.
    pub fn is_pairwise_exact(&self) -> bool {
        let nonzero: Vec<usize> = (1..self.coeffs.len()).filter(|&j| self.coeffs[j] != 0.0).collect();
        match nonzero.as_slice() {
            [] => true,
            [n] => self.coeffs[*n].abs() <= 1.0,
            _ => false,
        }
    }

    /// Noiseless channel output for `x` padded with `pad` on both sides;
    /// length N + L.
    pub fn convolve(&self, x: &[f64], pad: f64) -> Vec<f64> {
        let l = self.isi_len();
        let n = x.len();
        let sym = |t: isize| -> f64 {
            if t < 0 || t as usize >= n {
                pad
            } else {
                x[t as usize]
            }
        };
        (0..n + l)
            .map(|t| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, h)| h * sym(t as isize - j as isize))
                    .sum()
            })
            .collect()
    }
}

impl FromStr for PrTarget {
    type Err = Error;

    /// Accepts a coefficient list (`"1,-1"`) or a polynomial in D
    /// (`"1-D"`, `"1-D^2"`, `"1+0.5D"`, `"1 + 0.5*D - 0.2 D^2"`).
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Target("empty target".into()));
        }
        if !compact.contains(['D', 'd']) {
            let coeffs = compact
                .split(',')
                .map(|t| t.parse::<f64>().map_err(|_| Error::Target(format!("bad coefficient {t:?} in {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            return PrTarget::new(coeffs);
        }
        let mut coeffs: Vec<f64> = Vec::new();
        let bytes = compact.replace('d', "D");
        let mut terms: Vec<String> = Vec::new();
        let mut cur = String::new();
        for ch in bytes.chars() {
            if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with(['e', 'E', '^']) {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);
        for term in terms {
            let bad = || Error::Target(format!("bad term {term:?} in {s:?}"));
            let (coef_part, power) = match term.find('D') {
                None => (term.as_str(), 0usize),
                Some(pos) => {
                    let rest = &term[pos + 1..];
                    let power = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^').ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?
                    };
                    (term[..pos].trim_end_matches('*'), power)
                }
            };
            let coef = match coef_part {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            if coeffs.len() <= power {
                coeffs.resize(power + 1, 0.0);
            }
            coeffs[power] += coef;
        }
        PrTarget::new(coeffs)
    }
}

impl fmt::Display for PrTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// SNR `s^2` and noise variance `sigma^2 = (sum h_j^2) / s^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub snr_linear: f64,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn from_snr_db(target: &PrTarget, snr_db: f64) -> Self {
        let snr_linear = 10f64.powf(snr_db / 10.0);
        NoiseSpec {
            snr_linear,
            sigma2: target.energy() / snr_linear,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Precision coefficient `c` of the quadratic log-likelihood.
    pub fn precision(&self, convention: Convention) -> f64 {
        match convention {
            Convention::Paper => self.snr_linear,
            Convention::Exact => 1.0 / self.sigma2,
        }
    }
}

pub fn snr_to_sigma2(target: &PrTarget, snr_db: f64) -> f64 {
    NoiseSpec::from_snr_db(target, snr_db).sigma2
}

/// Channel SNR for a plotted SNR after charging a rate-R code for its
/// redundancy: `snr_plot_db + 10 log10 R`.
pub fn apply_rate_penalty(snr_plot_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside (0, 1]")));
    }
    Ok(snr_plot_db + 10.0 * rate.log10())
}

/// Which coefficient multiplies the squared residual in the log-likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `s^2`, reproducing `Q_1 = -s^2` on the dicode channel.
    #[default]
    Paper,
    /// `1/sigma^2`, the true Gaussian precision.
    Exact,
}

impl FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Convention::Paper),
            "exact" => Ok(Convention::Exact),
            _ => Err(Error::InvalidArgument(format!("unknown convention {s:?} (paper|exact)"))),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Paper => "paper",
            Convention::Exact => "exact",
        })
    }
}

/// Observations `y_t = sum_j h_j x_{t-j} + noise_t` for `t = 0..N+L`.
pub fn transmit(x: &[f64], target: &PrTarget, noise: &NoiseSpec, rng: &mut CounterRng, pad: f64) -> Vec<f64> {
    let sigma = noise.sigma();
    let mut y = target.convolve(x, pad);
    for v in y.iter_mut() {
        *v += sigma * rng.next_gaussian();
    }
    y
}

/// Per-bit fields and pairwise couplings of one received block.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCouplings {
    /// u_i, boundary corrections included
    pub u: Vec<f64>,
    /// q[p-1] = Q_p for p = 1..=L
    pub q: Vec<f64>,
    /// part of u_i contributed by the known padding symbols
    pub boundary: Vec<f64>,
    /// the precision coefficient c used
    pub precision: f64,
}

impl ChannelCouplings {
    /// Couplings of a channel with no ISI and the given fields.
    pub fn memoryless(u: Vec<f64>) -> Self {
        let n = u.len();
        ChannelCouplings {
            u,
            q: Vec::new(),
            boundary: vec![0.0; n],
            precision: f64::NAN,
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// Q_p, zero outside 1..=L.
    pub fn coupling(&self, p: usize) -> f64 {
        if p == 0 || p > self.q.len() {
            0.0
        } else {
            self.q[p - 1]
        }
    }
}

/// Pairwise couplings `Q_1..Q_L` for precision `c`.
pub fn pair_couplings(target: &PrTarget, c: f64) -> Vec<f64> {
    (1..=target.isi_len()).map(|p| c * target.autocorrelation(p)).collect()
}

pub fn compute_couplings(
    y: &[f64],
    target: &PrTarget,
    noise: &NoiseSpec,
    pad: f64,
    convention: Convention,
) -> Result<ChannelCouplings> {
    let l = target.isi_len();
    if y.len() < l {
        return Err(Error::LengthMismatch { expected: l, got: y.len() });
    }
    let n = y.len() - l;
    let c = noise.precision(convention);
    let h = target.coeffs();
    let q = pair_couplings(target, c);
    let mut u = Vec::with_capacity(n);
    let mut boundary = vec![0.0; n];
    for i in 0..n {
        let lin: f64 = h.iter().enumerate().map(|(j, hj)| hj * y[i + j]).sum();
        let mut b = 0.0;
        for p in 1..=l {
            if i < p {
                b -= q[p - 1] * pad;
            }
            if i + p >= n {
                b -= q[p - 1] * pad;
            }
        }
        boundary[i] = b;
        u.push(c * lin + b);
    }
    Ok(ChannelCouplings { u, q, boundary, precision: c })
}

/// Outcome of [`verify_expansion`].
#[derive(Clone, Copy, Debug)]
pub struct ExpansionCheck {
    /// max over configurations of |exact - model - offset|
    pub residual: f64,
    /// mean of (exact - model): the configuration-independent constant
    pub offset: f64,
}

pub const EXPANSION_LIMIT: usize = 20;

/// Compare the exact quadratic log-likelihood against the field/coupling
/// model over all 2^N configurations.
pub fn verify_expansion(
    y: &[f64],
    target: &PrTarget,
    noise: &NoiseSpec,
    pad: f64,
    convention: Convention,
) -> Result<ExpansionCheck> {
    let l = target.isi_len();
    let n = y.len().saturating_sub(l);
    if n > EXPANSION_LIMIT {
        return Err(Error::TooLarge { n, limit: EXPANSION_LIMIT });
    }
    let cp = compute_couplings(y, target, noise, pad, convention)?;
    let c = cp.precision;
    let total = 1usize << n;
    let mut diffs = Vec::with_capacity(total);
    let mut x = vec![0.0; n];
    for mask in 0..total {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 };
        }
        let clean = target.convolve(&x, pad);
        let exact: f64 = -0.5 * c * y.iter().zip(&clean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut model: f64 = cp.u.iter().zip(&x).map(|(u, x)| u * x).sum();
        for p in 1..=l {
            for a in 0..n.saturating_sub(p) {
                model -= cp.q[p - 1] * x[a] * x[a + p];
            }
        }
        diffs.push(exact - model);
    }
    let offset = diffs.iter().sum::<f64>() / total as f64;
    let residual = diffs.iter().map(|d| (d - offset).abs()).fold(0.0, f64::max);
    Ok(ExpansionCheck { residual, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> PrTarget {
        s.parse().unwrap()
    }

    #[test]
    fn parses_targets() {
        assert_eq!(t("1-D").coeffs(), &[1.0, -1.0]);
        assert_eq!(t("1,-1").coeffs(), &[1.0, -1.0]);
        assert_eq!(t("1-D^2").coeffs(), &[1.0, 0.0, -1.0]);
        assert_eq!(t("1+0.5D").coeffs(), &[1.0, 0.5]);
        assert_eq!(t("1 + 0.5*D - 0.2 D^2").coeffs(), &[1.0, 0.5, -0.2]);
        assert_eq!(t("1").isi_len(), 0);
        assert_eq!(t("1,0.5,0").coeffs(), &[1.0, 0.5]);
        assert!("2-D".parse::<PrTarget>().is_err());
        assert!("1-D^x".parse::<PrTarget>().is_err());
        assert!("".parse::<PrTarget>().is_err());
    }

    #[test]
    fn pairwise_exactness_flag() {
        assert!(t("1-D").is_pairwise_exact());
        assert!(t("1-D^2").is_pairwise_exact());
        assert!(t("1+0.5D").is_pairwise_exact());
        assert!(t("1").is_pairwise_exact());
        assert!(!t("1+2D").is_pairwise_exact());
        assert!(!t("1+0.5D-0.2D^2").is_pairwise_exact());
    }

    #[test]
    fn noiseless_outputs() {
        assert_eq!(t("1-D").convolve(&[1.0, 1.0, -1.0], 1.0), vec![0.0, 0.0, -2.0, 2.0]);
        assert_eq!(t("1").convolve(&[1.0, -1.0, -1.0], 1.0), vec![1.0, -1.0, -1.0]);
        assert_eq!(t("1+0.5D").convolve(&[1.0, -1.0], 1.0), vec![1.5, -0.5, 0.5]);
    }

    #[test]
    fn snr_mapping() {
        let s2 = |db: f64| 10f64.powf(db / 10.0);
        let db = |lin: f64| 10.0 * lin.log10();
        assert!((snr_to_sigma2(&t("1-D"), db(2.0)) - 1.0).abs() < 1e-14);
        assert!((snr_to_sigma2(&t("1"), db(4.0)) - 0.25).abs() < 1e-15);
        assert!((snr_to_sigma2(&t("1+0.5D"), db(5.0)) - 0.25).abs() < 1e-15);
        assert!((s2(db(3.0)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rate_penalty() {
        let p = apply_rate_penalty(0.0, 0.875).unwrap();
        assert!((p + 0.58).abs() < 0.005, "{p}");
        assert_eq!(apply_rate_penalty(4.0, 1.0).unwrap(), 4.0);
        assert!((apply_rate_penalty(0.0, 0.5).unwrap() + 3.0103).abs() < 1e-4);
        assert!(apply_rate_penalty(0.0, 0.0).is_err());
        assert!(apply_rate_penalty(0.0, 1.5).is_err());
    }

    #[test]
    fn dicode_coupling_in_paper_mode() {
        for db in [-3.0, 0.0, 2.5, 6.0] {
            let tgt = t("1-D");
            let noise = NoiseSpec::from_snr_db(&tgt, db);
            let cp = compute_couplings(&[0.3, -0.1, 0.7], &tgt, &noise, 1.0, Convention::Paper).unwrap();
            assert_eq!(cp.q, vec![-noise.snr_linear]);
        }
    }

    #[test]
    fn memoryless_fields() {
        let tgt = t("1");
        let noise = NoiseSpec::from_snr_db(&tgt, 3.0);
        let y = [0.5, -1.2, 2.0];
        let cp = compute_couplings(&y, &tgt, &noise, 1.0, Convention::Paper).unwrap();
        assert!(cp.q.is_empty());
        for (u, y) in cp.u.iter().zip(y) {
            assert_eq!(*u, noise.snr_linear * y);
        }
    }

    #[test]
    fn fields_for_one_plus_half_d() {
        let tgt = t("1+0.5D");
        let noise = NoiseSpec::from_snr_db(&tgt, 2.0);
        let s2 = noise.snr_linear;
        let y = [0.4, -0.3, 1.1, 0.2];
        let cp = compute_couplings(&y, &tgt, &noise, 1.0, Convention::Paper).unwrap();
        assert!((cp.q[0] - 0.5 * s2).abs() < 1e-14);
        // interior bit: no padding correction
        assert!((cp.u[1] - s2 * (y[1] + 0.5 * y[2])).abs() < 1e-14);
        // first bit sees the leading pad, last bit the trailing pad
        assert!((cp.u[0] - (s2 * (y[0] + 0.5 * y[1]) - 0.5 * s2)).abs() < 1e-14);
        assert!((cp.boundary[2] + 0.5 * s2).abs() < 1e-14);
    }

    #[test]
    fn expansion_residuals() {
        let mut rng = CounterRng::new(9);
        for (spec, n, tol) in [("1-D", 3, 1e-9), ("1", 5, 1e-12), ("1+0.5D", 4, 1e-9), ("1-D^2", 6, 1e-9)] {
            let tgt = t(spec);
            let noise = NoiseSpec::from_snr_db(&tgt, 1.5);
            let y: Vec<f64> = (0..n + tgt.isi_len()).map(|_| 2.0 * rng.next_gaussian()).collect();
            for conv in [Convention::Exact, Convention::Paper] {
                let chk = verify_expansion(&y, &tgt, &noise, 1.0, conv).unwrap();
                assert!(chk.residual < tol, "{spec} {conv}: {}", chk.residual);
            }
        }
        let big = vec![0.0; 22];
        assert!(matches!(
            verify_expansion(&big, &t("1-D"), &NoiseSpec::from_snr_db(&t("1-D"), 0.0), 1.0, Convention::Exact),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn transmit_is_seed_deterministic() {
        let tgt = t("1-D");
        let noise = NoiseSpec::from_snr_db(&tgt, 4.0);
        let x = [1.0, -1.0, -1.0, 1.0];
        let a = transmit(&x, &tgt, &noise, &mut CounterRng::new(3), 1.0);
        let b = transmit(&x, &tgt, &noise, &mut CounterRng::new(3), 1.0);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }
}
