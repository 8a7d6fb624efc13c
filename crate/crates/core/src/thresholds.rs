//! Closed-form regularity arithmetic: the critical index, the candidate
//! thresholds s1/s2/s3, the quadratic whose larger root bounds the smoothing
//! gain, feasibility of the Morawetz weight sigma, admissible space-time
//! pairs, interpolation exponents, and the (lambda, N, L) run selection.
//!
//! Everything here is pure f64 arithmetic with residual checks; infeasible
//! regions come back as structured flags so parameter sweeps can report holes
//! instead of aborting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisection depth used by every scalar solve in this module; 200 halvings
/// put the bracket width far below 1e-12 on unit-scale intervals.
const BISECT_ITERS: usize = 200;

/// Default rendering of the "plus" in N-exponents.
pub const DEFAULT_EPS_PLUS: f64 = 0.01;
/// Default smallness margin standing in for "much less than 1".
pub const DEFAULT_ETA: f64 = 0.1;

/// Problem parameters (n, p, s, sigma) with the threshold-range contract
/// enforced at construction: 4/n < p < 4/(n-2), 0 < s < 1, 0 < sigma <= s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub p: f64,
    pub s: f64,
    pub sigma: f64,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64, s: f64, sigma: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::param("n", format!("threshold arithmetic needs n >= 3, got {n}")));
        }
        check_p_range(n, p)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param("s", format!("violates 0 < s < 1: got {s}")));
        }
        if !(sigma > 0.0 && sigma <= s) {
            return Err(Error::param(
                "sigma",
                format!("violates 0 < sigma <= s: got sigma = {sigma}, s = {s}"),
            ));
        }
        Ok(ProblemParams { n, p, s, sigma })
    }
}

/// Reject p outside the supercritical-subcritical window, naming the bound.
pub fn check_p_range(n: u32, p: f64) -> Result<()> {
    let lower = 4.0 / n as f64;
    if !(p > lower) {
        return Err(Error::param(
            "p",
            format!("violates p > 4/n = {lower}: got {p}"),
        ));
    }
    if n > 2 {
        let upper = 4.0 / (n as f64 - 2.0);
        if !(p < upper) {
            return Err(Error::param(
                "p",
                format!("violates p < 4/(n-2) = {upper}: got {p}"),
            ));
        }
    }
    Ok(())
}

/// s_c = n/2 - 2/p, the scaling-invariant Sobolev index.
pub fn critical_regularity(n: u32, p: f64) -> f64 {
    n as f64 / 2.0 - 2.0 / p
}

/// First candidate threshold: np / (2(p+2)).
pub fn s1(n: u32, p: f64) -> f64 {
    n as f64 * p / (2.0 * (p + 2.0))
}

/// Second candidate threshold: (1 + min{1,p} s_c) / (1 + min{1,p}).
pub fn s2(n: u32, p: f64) -> f64 {
    let m = p.min(1.0);
    (1.0 + m * critical_regularity(n, p)) / (1.0 + m)
}

/// The quadratic A s^2 + B s + C = 0 equivalent to
/// s_c (1-s) [n-3-sigma(n-6)] = min{1,p} sigma (s_c - s)^2,
/// together with its larger root when real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SPlusRoot {
    pub quad_a: f64,
    pub quad_b: f64,
    pub quad_c: f64,
    pub discriminant: f64,
    /// Larger root; `None` when the discriminant is negative.
    pub value: Option<f64>,
}

/// Larger root of the threshold quadratic at Morawetz weight sigma.
pub fn s_plus(n: u32, p: f64, sigma: f64) -> Result<SPlusRoot> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(
            "sigma",
            format!("quadratic needs sigma > 0 (the sigma -> 0 limit is a separate slope), got {sigma}"),
        ));
    }
    let sc = critical_regularity(n, p);
    if !(sc > 0.0) {
        return Err(Error::param(
            "p",
            format!("quadratic needs s_c > 0, got s_c = {sc} at n = {n}, p = {p}"),
        ));
    }
    let m = p.min(1.0);
    let a = m * sigma;
    let big_b = n as f64 - 3.0 - sigma * (n as f64 - 6.0);
    let b = sc * big_b - 2.0 * a * sc;
    let c = a * sc * sc - sc * big_b;
    let disc = b * b - 4.0 * a * c;
    let value = if disc >= 0.0 {
        Some((-b + disc.sqrt()) / (2.0 * a))
    } else {
        None
    };
    Ok(SPlusRoot {
        quad_a: a,
        quad_b: b,
        quad_c: c,
        discriminant: disc,
        value,
    })
}

/// Closed form of the larger root for n = 3, where it is sigma-independent:
/// (-s_c + sqrt(12 s_c - 3 s_c^2)) / 2.
pub fn s_plus_n3_closed_form(p: f64) -> f64 {
    let sc = critical_regularity(3, p);
    (-sc + (12.0 * sc - 3.0 * sc * sc).sqrt()) / 2.0
}

/// Linear coefficient of s_+ = 1 - coeff * sigma + O(sigma^2) as sigma -> 0,
/// for n >= 4: (s_c - 1)^2 min{1,p} / ((n-3) s_c).
pub fn remark3_slope(n: u32, p: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::param(
            "n",
            format!("the sigma -> 0 slope formula needs n >= 4 (it vanishes at n = 3), got {n}"),
        ));
    }
    let sc = critical_regularity(n, p);
    Ok((sc - 1.0).powi(2) * p.min(1.0) / ((n as f64 - 3.0) * sc))
}

/// Strict feasibility of the Morawetz weight: 2 sigma0 [8 - p(n+2)] < (n-3)(pn-4)
/// together with sigma0 <= s.
pub fn sigma0_feasible(n: u32, p: f64, sigma0: f64, s: f64) -> bool {
    if sigma0 > s {
        return false;
    }
    2.0 * sigma0 * (8.0 - p * (n as f64 + 2.0)) < (n as f64 - 3.0) * (p * n as f64 - 4.0)
}

/// Largest feasible sigma0 in (0, s], or None when no positive weight passes.
///
/// The constraint is linear in sigma0: with A = 2(8 - p(n+2)) and
/// R = (n-3)(pn-4) >= 0 on the admissible range, A <= 0 makes every positive
/// weight feasible when A < 0 or R > 0, and A > 0 caps the weight at R / A.
pub fn sigma0_cap(n: u32, p: f64, s: f64) -> Option<f64> {
    let a = 2.0 * (8.0 - p * (n as f64 + 2.0));
    let r = (n as f64 - 3.0) * (p * n as f64 - 4.0);
    if a <= 0.0 {
        if r > 0.0 || a < 0.0 {
            Some(s)
        } else {
            None // 0 < 0 fails for every sigma0 > 0
        }
    } else if r > 0.0 {
        Some(s.min(r / a))
    } else {
        None
    }
}

/// Everything the threshold calculus produces for one (n, p), with the
/// optional exponent block when (s, sigma) are supplied and the optional run
/// selection when a data norm is supplied. Infeasible entries stay `None`
/// and are explained in `flags`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub n: u32,
    pub p: f64,
    pub s_c: f64,
    pub s_1: f64,
    pub s_2: f64,
    /// Resolved Morawetz weight at the fixed point, when feasible.
    pub sigma0: Option<f64>,
    pub sigma0_is_feasible: bool,
    /// s_+ evaluated at sigma0 (the third candidate threshold).
    pub s_3: Option<f64>,
    /// Quadratic coefficients at sigma0.
    pub quad: Option<(f64, f64, f64)>,
    pub s_0: Option<f64>,
    /// Which candidate attains the max at the fixed point.
    pub binding_branch: Option<String>,
    /// Whether s_1 >= s_2 (the n >= 4 dominance pattern).
    pub s1_dominates: bool,
    pub exponents: Option<ExponentBlock>,
    pub selection: Option<Selection>,
    pub flags: Vec<String>,
}

/// Exponent formulas evaluated at a concrete (s, sigma).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentBlock {
    pub s: f64,
    pub sigma: f64,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub alpha_limit: f64,
    pub beta_limit: f64,
    pub flags: Vec<String>,
}

/// Interpolation exponents (epsilon, theta) at (n, p, sigma); `None` entries
/// carry the degeneracy in `flags`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationExponents {
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub flags: Vec<String>,
}

/// epsilon = 4 p sigma / (n-3+4 sigma - 2 p sigma),
/// theta = (n-3+4 sigma)(4 - p(n-2)) / (2p (n-3-sigma(n-6))).
pub fn interpolation_exponents(n: u32, p: f64, sigma: f64) -> Result<InterpolationExponents> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    let nf = n as f64;
    let lower = 4.0 * (nf - 3.0 + 4.0 * sigma) / (nf * (nf - 3.0 + 2.0 * sigma) + 4.0 * sigma);
    if !(p > lower) {
        return Err(Error::param(
            "p",
            format!(
                "violates the lower bound p > 4(n-3+4σ)/(n(n-3+2σ)+4σ) = {lower}: got {p}"
            ),
        ));
    }
    let mut flags = Vec::new();
    let eps_den = nf - 3.0 + 4.0 * sigma - 2.0 * p * sigma;
    let epsilon = if eps_den.abs() < 1e-12 {
        flags.push(format!(
            "epsilon denominator n-3+4σ-2pσ vanishes at n={n}, p={p}, σ={sigma}; structural degeneracy (at n=3, p=2 it vanishes for every σ) — lower σ or p"
        ));
        None
    } else {
        let e = 4.0 * p * sigma / eps_den;
        if e <= 0.0 {
            flags.push(format!("epsilon = {e} not positive"));
            None
        } else {
            Some(e)
        }
    };
    let theta_den = 2.0 * p * (nf - 3.0 - sigma * (nf - 6.0));
    let theta = if theta_den.abs() < 1e-12 {
        flags.push("theta denominator 2p(n-3-σ(n-6)) vanishes".to_string());
        None
    } else {
        let t = (nf - 3.0 + 4.0 * sigma) * (4.0 - p * (nf - 2.0)) / theta_den;
        if t <= 0.0 || t > 1.0 {
            flags.push(format!("theta = {t} outside (0, 1]"));
            None
        } else {
            Some(t)
        }
    };
    Ok(InterpolationExponents {
        epsilon,
        theta,
        flags,
    })
}

/// Space-time Holder exponents alpha(eps), beta(eps) with their eps -> 0
/// limits and a suggested eps keeping both positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderExponents {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_limit: f64,
    pub beta_limit: f64,
    pub suggested_eps: Option<f64>,
    pub feasible: bool,
    pub flags: Vec<String>,
}

/// alpha(eps) = p(1 - n/(2s)) + [8σ + ε(σ(n+2) - s(n-3+4σ))] / (2sσ(2+ε));
/// beta(eps) = (n/s)(p/2 - (8 + ε(n+2)) / (2n(2+ε))).
pub fn morawetz_holder_exponents(
    n: u32,
    p: f64,
    s: f64,
    sigma: f64,
    eps: f64,
) -> Result<HolderExponents> {
    let nf = n as f64;
    if !(sigma > 0.0 && s > 0.0) {
        return Err(Error::param("sigma", "needs sigma > 0 and s > 0".to_string()));
    }
    let s_lower = sigma * (nf - 2.0) / (nf - 3.0 + 4.0 * sigma);
    if !(s > s_lower) {
        return Err(Error::param(
            "s",
            format!("violates s > σ(n-2)/(n-3+4σ) = {s_lower}: got {s}"),
        ));
    }
    if !(p > 0.0) {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::param("eps", format!("must be nonnegative, got {eps}")));
    }
    let alpha_at = |e: f64| {
        p * (1.0 - nf / (2.0 * s))
            + (8.0 * sigma + e * (sigma * (nf + 2.0) - s * (nf - 3.0 + 4.0 * sigma)))
                / (2.0 * s * sigma * (2.0 + e))
    };
    let beta_at =
        |e: f64| (nf / s) * (p / 2.0 - (8.0 + e * (nf + 2.0)) / (2.0 * nf * (2.0 + e)));
    let alpha_limit = p * (1.0 - nf / (2.0 * s)) + 2.0 / s;
    let beta_limit = (nf / s) * (p / 2.0 - 2.0 / nf);
    let mut flags = Vec::new();
    let feasible = alpha_limit > 0.0 && beta_limit > 0.0;
    if !feasible {
        flags.push(format!(
            "eps -> 0 limits not both positive (alpha -> {alpha_limit}, beta -> {beta_limit}); the window 4/n < p < 4/(n-2s) is violated in effect"
        ));
    }
    // Both maps are decreasing in eps, so the positive region is an interval
    // [0, eps_max); suggest its midpoint found by bisection.
    let suggested_eps = if feasible {
        let pos = |e: f64| alpha_at(e) > 0.0 && beta_at(e) > 0.0;
        let cap = 4.0;
        if pos(cap) {
            Some(cap / 2.0)
        } else {
            let (mut lo, mut hi) = (0.0, cap);
            for _ in 0..BISECT_ITERS {
                let mid = 0.5 * (lo + hi);
                if pos(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * lo)
        }
    } else {
        None
    };
    Ok(HolderExponents {
        alpha: alpha_at(eps),
        beta: beta_at(eps),
        alpha_limit,
        beta_limit,
        suggested_eps,
        feasible,
        flags,
    })
}

/// Schrodinger admissibility: 2/q + n/r = n/2 to 1e-12, 2 <= q, r <= inf,
/// excluding the forbidden endpoint (q, r, n) = (2, inf, 2).
pub fn admissible_pair_check(q: f64, r: f64, n: u32) -> bool {
    if !(q >= 2.0 && r >= 2.0) {
        return false;
    }
    if n == 2 && q == 2.0 && r.is_infinite() {
        return false;
    }
    let lhs = 2.0 / q + n as f64 / r; // 1/inf = 0 handles endpoints
    (lhs - n as f64 / 2.0).abs() <= 1e-12
}

/// The four admissible-pair families used alongside the Morawetz norm, at
/// parameters (n, sigma, eps, p). Each output should pass
/// `admissible_pair_check`; tests verify that.
pub fn strichartz_pair_families(n: u32, sigma: f64, eps: f64, p: f64) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let a = nf - 3.0 + 4.0 * sigma;
    vec![
        (2.0, 2.0 * nf / (nf - 2.0)),
        (a / sigma, 2.0 * nf * a / (nf * a - 4.0 * sigma)),
        (
            2.0 * p * (2.0 + eps) / eps,
            2.0 * nf * p * (2.0 + eps) / (nf * p * (2.0 + eps) - 2.0 * eps),
        ),
        (2.0 + eps, 2.0 * nf * (2.0 + eps) / (nf * (2.0 + eps) - 4.0)),
    ]
}

/// Outcome of the run-parameter selection. Infeasibility is a flagged state,
/// not an error, so (n, p, s) sweeps can tabulate holes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub feasible: bool,
    pub gamma: f64,
    pub kappa: f64,
    pub lambda: Option<f64>,
    pub n_cut: Option<f64>,
    pub l_intervals: Option<f64>,
    /// Direct re-substitution of both selection displays, when feasible.
    pub display1: Option<f64>,
    pub display2: Option<f64>,
    pub flags: Vec<String>,
}

/// Choose (lambda, N, L) so that, with margin eta:
/// N^{1-s} lambda^{s_c-s} ||u0|| <= eta (equality defines lambda) and
/// lambda^{s_c B / sigma} N^{min{1,p}(s_c-s)+eps_plus} <= eta,
/// where B = n-3-sigma(n-6). Substituting the lambda that makes the first
/// display an equality turns the second into N^Gamma <= eta^{1+kappa}
/// ||u0||^{-kappa} with Gamma = (1-s) kappa + min{1,p}(s_c-s) + eps_plus and
/// kappa = s_c B / (sigma (s-s_c)). Gamma < 0 makes large N help, so N is
/// the smallest value >= 2 satisfying that bound and
/// L = ceil(lambda^{s_c B / sigma}).
pub fn select_parameters(
    n: u32,
    p: f64,
    s: f64,
    sigma: f64,
    data_norm: f64,
    eta: f64,
) -> Result<Selection> {
    let params = ProblemParams::new(n, p, s, sigma)?;
    if !(data_norm >= 0.0 && data_norm.is_finite()) {
        return Err(Error::param(
            "data_norm",
            format!("must be finite and nonnegative, got {data_norm}"),
        ));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", format!("margin must lie in (0,1), got {eta}")));
    }
    let eps_plus = DEFAULT_EPS_PLUS;
    let sc = critical_regularity(params.n, params.p);
    let m = params.p.min(1.0);
    let big_b = n as f64 - 3.0 - sigma * (n as f64 - 6.0);
    let kappa = sc * big_b / (sigma * (s - sc));
    let gamma = (1.0 - s) * kappa + m * (sc - s) + eps_plus;
    let mut flags = Vec::new();

    let report = s0_report(n, p)?;
    match report.s_0 {
        Some(s0) if s > s0 => {}
        Some(s0) => {
            flags.push(format!(
                "infeasible: s = {s} does not exceed the threshold s_0 = {s0}"
            ));
        }
        None => flags.push("infeasible: threshold s_0 itself is undefined here".to_string()),
    }
    if gamma >= 0.0 {
        let quad_text = match s_plus(n, p, sigma) {
            Ok(root) => format!(
                "{} s^2 + {} s + {} = 0",
                root.quad_a, root.quad_b, root.quad_c
            ),
            Err(_) => "the threshold quadratic".to_string(),
        };
        flags.push(format!(
            "infeasible: Gamma = {gamma} >= 0, so raising the cutoff never shrinks the increment; s sits at or below the larger root of {quad_text}"
        ));
    }
    if !flags.is_empty() {
        return Ok(Selection {
            feasible: false,
            gamma,
            kappa,
            lambda: None,
            n_cut: None,
            l_intervals: None,
            display1: None,
            display2: None,
            flags,
        });
    }

    let n_direct = if data_norm > 0.0 {
        (eta.powf(1.0 + kappa) * data_norm.powf(-kappa)).powf(1.0 / gamma)
    } else {
        0.0
    };
    let n_cut = 2.0f64.max(n_direct);
    let lambda = (n_cut.powf(1.0 - s) * data_norm / eta).powf(1.0 / (s - sc));
    let l_intervals = lambda.powf(sc * big_b / sigma).ceil();
    let display1 = if data_norm > 0.0 {
        n_cut.powf(1.0 - s) * lambda.powf(sc - s) * data_norm
    } else {
        0.0
    };
    let display2 = lambda.powf(sc * big_b / sigma) * n_cut.powf(m * (sc - s) + eps_plus);
    Ok(Selection {
        feasible: true,
        gamma,
        kappa,
        lambda: Some(lambda),
        n_cut: Some(n_cut),
        l_intervals: Some(l_intervals),
        display1: Some(display1),
        display2: Some(display2),
        flags,
    })
}

/// The threshold s_0(n, p) and everything computed on the way, resolved by
/// the fixed point s* = max(s_1, s_2, s_+(sigma0(s*))) with sigma0(s) the
/// largest feasible weight <= s. The max is nonincreasing in s (sigma0 grows
/// with s and the root falls with sigma), so the fixed point is unique and a
/// plain bisection on g(s) - s finds it.
pub fn s0_report(n: u32, p: f64) -> Result<RegularityReport> {
    check_p_range(n, p)?;
    if n < 3 {
        return Err(Error::param("n", format!("needs n >= 3, got {n}")));
    }
    let sc = critical_regularity(n, p);
    let v1 = s1(n, p);
    let v2 = s2(n, p);
    let mut flags = Vec::new();

    let candidate = |s: f64| -> Result<(f64, Option<f64>, Option<f64>)> {
        // Returns (g(s), sigma0(s), s3(s)).
        let base = v1.max(v2);
        match sigma0_cap(n, p, s) {
            Some(sg) if sg > 0.0 => {
                let root = s_plus(n, p, sg)?;
                match root.value {
                    Some(v) => Ok((base.max(v), Some(sg), Some(v))),
                    None => Ok((base, Some(sg), None)),
                }
            }
            _ => Ok((base, None, None)),
        }
    };

    let lo0 = sc.max(0.0) + 1e-12;
    let hi0 = 1.0 - 1e-12;
    if lo0 >= hi0 {
        flags.push(format!("no room between s_c = {sc} and 1"));
        return Ok(RegularityReport {
            n,
            p,
            s_c: sc,
            s_1: v1,
            s_2: v2,
            sigma0: None,
            sigma0_is_feasible: false,
            s_3: None,
            quad: None,
            s_0: None,
            binding_branch: None,
            s1_dominates: v1 >= v2,
            exponents: None,
            selection: None,
            flags,
        });
    }

    let (g_lo, _, _) = candidate(lo0)?;
    let s_star = if g_lo <= lo0 {
        // Fixed point sits at or below the domain edge: the max is the
        // constant branch max(s1, s2).
        g_lo
    } else {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            let (g_mid, _, _) = candidate(mid)?;
            if g_mid > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let (g_star, sigma0, s3) = candidate(s_star)?;
    let sigma0_is_feasible = sigma0.is_some();
    if !sigma0_is_feasible {
        flags.push(
            "no positive Morawetz weight passes 2σ[8-p(n+2)] < (n-3)(pn-4); s_0 falls back to max(s_1, s_2)"
                .to_string(),
        );
    }
    let quad = match sigma0 {
        Some(sg) => {
            let root = s_plus(n, p, sg)?;
            Some((root.quad_a, root.quad_b, root.quad_c))
        }
        None => None,
    };
    let s_0 = if g_star < 1.0 && g_star > sc {
        Some(g_star)
    } else {
        flags.push(format!("fixed point {g_star} escapes (s_c, 1)"));
        None
    };
    let binding_branch = s_0.map(|v| {
        if let Some(s3v) = s3 {
            if (s3v - v).abs() <= (v1 - v).abs().min((v2 - v).abs()) {
                return "s_3".to_string();
            }
        }
        if (v1 - v).abs() <= (v2 - v).abs() {
            "s_1".to_string()
        } else {
            "s_2".to_string()
        }
    });
    Ok(RegularityReport {
        n,
        p,
        s_c: sc,
        s_1: v1,
        s_2: v2,
        sigma0,
        sigma0_is_feasible,
        s_3: s3,
        quad,
        s_0,
        binding_branch,
        s1_dominates: v1 >= v2,
        exponents: None,
        selection: None,
        flags,
    })
}

/// Report extended with the exponent block at (s, sigma) and, when a data
/// norm is given, the run selection.
pub fn full_report(
    params: &ProblemParams,
    data_norm: Option<f64>,
    eta: f64,
) -> Result<RegularityReport> {
    let mut report = s0_report(params.n, params.p)?;
    let interp = interpolation_exponents(params.n, params.p, params.sigma);
    let holder = morawetz_holder_exponents(params.n, params.p, params.s, params.sigma, 0.0);
    let mut block = ExponentBlock {
        s: params.s,
        sigma: params.sigma,
        epsilon: None,
        theta: None,
        alpha_limit: f64::NAN,
        beta_limit: f64::NAN,
        flags: Vec::new(),
    };
    match interp {
        Ok(ie) => {
            block.epsilon = ie.epsilon;
            block.theta = ie.theta;
            block.flags.extend(ie.flags);
        }
        Err(e) => block.flags.push(e.to_string()),
    }
    match holder {
        Ok(h) => {
            block.alpha_limit = h.alpha_limit;
            block.beta_limit = h.beta_limit;
            if !h.feasible {
                block.flags.extend(h.flags);
            }
        }
        Err(e) => block.flags.push(e.to_string()),
    }
    report.exponents = Some(block);
    if let Some(norm) = data_norm {
        report.selection = Some(select_parameters(
            params.n,
            params.p,
            params.s,
            params.sigma,
            norm,
            eta,
        )?);
    }
    Ok(report)
}

/// Locate the n = 3 crossing of the s_1 branch and the closed-form root
/// branch by bisection on their difference.
pub fn n3_branch_crossing() -> f64 {
    let diff = |p: f64| s1(3, p) - s_plus_n3_closed_form(p);
    let (mut lo, mut hi) = (1.4, 1.7);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
