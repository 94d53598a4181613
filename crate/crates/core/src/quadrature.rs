//! The integrals `I_s(w) = ∫₀¹ κ^s e^(−κw) (1−κ)^(b−1) h(κ) dκ`.
//!
//! Everything is accumulated in log space. The default scheme is a
//! double-exponential (tanh-sinh) rule whose abscissae carry their distance
//! to both ends of the panel, so `log κ` and `log(1−κ)` stay exact even
//! when `κ` underflows. Large `w` pushes the mass towards `κ ≈ (s+1)/w`;
//! the unit interval is then split geometrically around that scale.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prior::{HFamily, PriorSpec};
use crate::real::{LogSumExp, Real};
use crate::special::ln_gamma;

/// Largest tanh-sinh parameter ever visited.
const T_CAP: f64 = 20.0;
/// Nodes this far (in log units) below the panel peak end a side sweep.
const NEGLIGIBLE: f64 = 80.0;
/// Minimum level before a convergence claim is accepted.
const MIN_LEVELS: usize = 3;
/// Gauss–Jacobi panels use `8·2^level` nodes, capped at this many levels.
const GJ_MAX_LEVELS: usize = 6;
/// Cut-off in `t = −log κ` for the boundary (`s = −1`) integrals.
const BOUNDARY_T: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    DoubleExponential,
    GaussJacobiComposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig<T: Real> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_levels: usize,
    pub scheme: Scheme,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10).max(T::lit(64.0) * T::EPS),
            abs_tol: T::lit(1e-300).max(T::min_positive_value()),
            max_levels: 12,
            scheme: Scheme::DoubleExponential,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.rel_tol <= T::lit(1e-4)) {
            return Err(Error::Config(format!("rel_tol must lie in (0, 1e-4], got {}", self.rel_tol)));
        }
        if self.max_levels < 4 {
            return Err(Error::Config(format!("max_levels must be at least 4, got {}", self.max_levels)));
        }
        if !(self.abs_tol >= T::zero()) {
            return Err(Error::Config("abs_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Log of a positive integral with its convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult<T: Real> {
    pub log_value: T,
    pub est_rel_err: T,
    pub converged: bool,
}

impl<T: Real> IntegralResult<T> {
    pub(crate) fn require_converged(self) -> Result<Self> {
        if self.converged && self.log_value.is_finite() {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                est_rel_err: self.est_rel_err.as_f64(),
            })
        }
    }
}

/// A quadrature abscissa described by its distances to both panel ends.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Node<T: Real> {
    pub from_lo: T,
    pub from_hi: T,
    pub ln_from_lo: T,
    pub ln_from_hi: T,
}

/// `κ`, `log κ`, `1−κ` and `log(1−κ)` at an abscissa.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KappaPoint<T: Real> {
    pub kappa: T,
    pub ln_kappa: T,
    pub one_minus: T,
    pub ln_one_minus: T,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Piece<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn point(&self, node: &Node<T>) -> KappaPoint<T> {
        let kappa = self.lo + node.from_lo;
        let ln_kappa = if self.lo == T::zero() { node.ln_from_lo } else { kappa.ln() };
        let (one_minus, ln_one_minus) = if self.hi == T::one() {
            (node.from_hi, node.ln_from_hi)
        } else {
            let om = (T::one() - self.hi) + node.from_hi;
            (om, om.ln())
        };
        KappaPoint {
            kappa,
            ln_kappa,
            one_minus,
            ln_one_minus,
        }
    }
}

/// Panels of `[0, 1]` refined geometrically towards `κ = 0` at scale
/// `near_zero` and towards `κ = 1` at scale `near_one`.
pub(crate) fn geometric_pieces<T: Real>(near_zero: Option<T>, near_one: Option<T>) -> Vec<Piece<T>> {
    let quarter = T::lit(0.25);
    let four = T::lit(4.0);
    let mut cuts = vec![T::zero()];
    if let Some(c) = near_zero.filter(|c| c.is_finite() && *c > T::zero()) {
        let mut x = c + c;
        let mut left = Vec::new();
        while x < quarter {
            left.push(x);
            x = x * four;
        }
        cuts.extend(left);
    }
    if let Some(c) = near_one.filter(|c| c.is_finite() && *c > T::zero()) {
        let mut x = c + c;
        let mut right = Vec::new();
        while x < quarter {
            right.push(T::one() - x);
            x = x * four;
        }
        right.reverse();
        cuts.extend(right);
    }
    cuts.push(T::one());
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Piece::new(w[0], w[1]))
        .collect()
}

struct PanelState<T: Real, const N: usize> {
    acc: [LogSumExp<T>; N],
    peak: T,
}

/// Log-space tanh-sinh over a set of panels, for `N` integrands that share
/// abscissae. `log_f` returns the log-integrands at a node.
pub(crate) fn tanh_sinh<T, const N: usize, F>(pieces: &[Piece<T>], cfg: &QuadConfig<T>, log_f: F) -> [IntegralResult<T>; N]
where
    T: Real,
    F: Fn(&Piece<T>, &Node<T>) -> [T; N],
{
    let half_pi = T::FRAC_PI_2();
    let ln_half_pi = half_pi.ln();
    let ln2 = T::LN_2();
    let two = T::lit(2.0);
    let t_cap = T::lit(T_CAP);
    let t_break = T::lit(3.0);
    let negligible = T::lit(NEGLIGIBLE);

    let mut states: Vec<PanelState<T, N>> = pieces
        .iter()
        .map(|_| PanelState {
            acc: [LogSumExp::new(); N],
            peak: T::neg_infinity(),
        })
        .collect();

    let mut prev: Option<[T; N]> = None;
    let mut last = [IntegralResult {
        log_value: T::nan(),
        est_rel_err: T::infinity(),
        converged: false,
    }; N];

    for level in 0..cfg.max_levels {
        let h = T::one() / T::from_usize_lossy(1usize << level);
        for (piece, st) in pieces.iter().zip(states.iter_mut()) {
            let width = piece.hi - piece.lo;
            let half = width / two;
            let ln_half = half.ln();
            if level == 0 {
                let node = Node {
                    from_lo: half,
                    from_hi: half,
                    ln_from_lo: ln_half,
                    ln_from_hi: ln_half,
                };
                let vals = log_f(piece, &node);
                for i in 0..N {
                    let term = ln_half_pi + vals[i];
                    st.acc[i].add(term);
                    st.peak = st.peak.max(term);
                }
            }
            let step = if level == 0 { 1 } else { 2 };
            for left in [true, false] {
                let mut k = 1usize;
                loop {
                    let t = T::from_usize_lossy(k) * h;
                    if t > t_cap {
                        break;
                    }
                    let x = half_pi * t.sinh();
                    // d = 1 − tanh(x) = 2 / (1 + e^{2x})
                    let ln_d = ln2 - two * x - (-two * x).exp().ln_1p();
                    let d = ln_d.exp();
                    let ln_w = ln_half_pi + t.cosh().ln() + ln_d + (two - d).ln();
                    let dist = half * d;
                    let ln_dist = ln_half + ln_d;
                    let far = width - dist;
                    let node = if left {
                        Node {
                            from_lo: dist,
                            from_hi: far,
                            ln_from_lo: ln_dist,
                            ln_from_hi: far.ln(),
                        }
                    } else {
                        Node {
                            from_lo: far,
                            from_hi: dist,
                            ln_from_lo: far.ln(),
                            ln_from_hi: ln_dist,
                        }
                    };
                    let vals = log_f(piece, &node);
                    let mut tmax = T::neg_infinity();
                    for i in 0..N {
                        let term = ln_w + vals[i];
                        st.acc[i].add(term);
                        if term > tmax {
                            tmax = term;
                        }
                    }
                    st.peak = st.peak.max(tmax);
                    if t >= t_break && !(tmax >= st.peak - negligible) {
                        break;
                    }
                    k += step;
                }
            }
        }

        let ln_h = h.ln();
        let mut totals = [T::neg_infinity(); N];
        for i in 0..N {
            let mut tot = LogSumExp::new();
            for (piece, st) in pieces.iter().zip(states.iter()) {
                let ln_half = ((piece.hi - piece.lo) / two).ln();
                tot.add(ln_h + ln_half + st.acc[i].value());
            }
            totals[i] = tot.value();
        }

        if let Some(prev) = prev {
            let mut all = true;
            for i in 0..N {
                let err = (totals[i] - prev[i]).exp_m1().abs();
                let abs_diff = (totals[i].exp() - prev[i].exp()).abs();
                let ok = totals[i].is_finite()
                    && (err <= cfg.rel_tol || abs_diff <= cfg.abs_tol && totals[i].exp() <= cfg.abs_tol);
                all &= ok && level >= MIN_LEVELS;
                last[i] = IntegralResult {
                    log_value: totals[i],
                    est_rel_err: if err.is_nan() { T::infinity() } else { err },
                    converged: false,
                };
            }
            if all {
                for r in last.iter_mut() {
                    r.converged = true;
                }
                return last;
            }
        }
        prev = Some(totals);
    }
    last
}

/// A Gauss–Jacobi rule on `[−1, 1]` for the weight `(1−x)^α (1+x)^β`:
/// nodes and log-weights.
pub(crate) fn gauss_jacobi_rule(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        let t = 2.0 * kf + ab;
        d[k] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (t * (t + 2.0))
        };
        if k >= 1 {
            let off = if k == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
            } else {
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab) / (t * t * (t + 1.0) * (t - 1.0))
            };
            e[k - 1] = off.sqrt();
        }
    }
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut z);
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0);
    let mut pairs: Vec<(f64, f64)> = d
        .iter()
        .zip(z.iter())
        .map(|(&x, &v)| (x, ln_mu0 + 2.0 * v.abs().ln()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// component of every eigenvector (all Golub–Welsch needs).
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Composite Gauss–Jacobi for `I_s` and `I_{s+1}`: the algebraic endpoint
/// factors go into the weight of the first and last panels, interior panels
/// use Gauss–Legendre.
fn gauss_jacobi_pair<T: Real>(spec: &PriorSpec<T>, s: T, w: T, pieces: &[Piece<T>], cfg: &QuadConfig<T>) -> [IntegralResult<T>; 2] {
    let b = spec.b();
    let h = *spec.h();
    let mut prev: Option<[T; 2]> = None;
    let mut last = [IntegralResult {
        log_value: T::nan(),
        est_rel_err: T::infinity(),
        converged: false,
    }; 2];
    let levels = cfg.max_levels.min(GJ_MAX_LEVELS);
    for level in 0..levels {
        let n = 8usize << level;
        let mut acc = [LogSumExp::new(), LogSumExp::new()];
        for piece in pieces {
            let at_zero = piece.lo == T::zero();
            let at_one = piece.hi == T::one();
            let beta = if at_zero { s } else { T::zero() };
            let alpha = if at_one { b - T::one() } else { T::zero() };
            let (xs, lws) = gauss_jacobi_rule(n, alpha.as_f64(), beta.as_f64());
            let half = (piece.hi - piece.lo) / T::lit(2.0);
            let ln_scale = (alpha + beta + T::one()) * half.ln();
            for (&x, &lw) in xs.iter().zip(lws.iter()) {
                let x = T::lit(x);
                let from_lo = half * (T::one() + x);
                let from_hi = half * (T::one() - x);
                let node = Node {
                    from_lo,
                    from_hi,
                    ln_from_lo: from_lo.ln(),
                    ln_from_hi: from_hi.ln(),
                };
                let pt = piece.point(&node);
                // The weight already carries κ^β and (1−κ)^α.
                let rest = (s - beta) * pt.ln_kappa - w * pt.kappa
                    + (b - T::one() - alpha) * pt.ln_one_minus
                    + h.ln_h_at(pt.kappa, pt.ln_kappa);
                let base = T::lit(lw) + ln_scale + rest;
                acc[0].add(base);
                acc[1].add(base + pt.ln_kappa);
            }
        }
        let totals = [acc[0].value(), acc[1].value()];
        if let Some(prev) = prev {
            let mut all = true;
            for i in 0..2 {
                let err = (totals[i] - prev[i]).exp_m1().abs();
                all &= totals[i].is_finite() && err <= cfg.rel_tol;
                last[i] = IntegralResult {
                    log_value: totals[i],
                    est_rel_err: if err.is_nan() { T::infinity() } else { err },
                    converged: false,
                };
            }
            if all {
                for r in last.iter_mut() {
                    r.converged = true;
                }
                return last;
            }
        }
        prev = Some(totals);
    }
    last
}

fn check_integrable<T: Real>(spec: &PriorSpec<T>, s: T, w: T) -> Result<()> {
    if !(w >= T::zero() && w.is_finite()) {
        return Err(domain("w", w.as_f64(), "[0, ∞)"));
    }
    if s.is_nan() {
        return Err(domain("s", f64::NAN, "(−1, ∞)"));
    }
    if spec.b() <= T::zero() {
        return Err(Error::Integrability(format!(
            "(1−κ)^(b−1) with b = {} is not integrable at κ = 1",
            spec.b()
        )));
    }
    if s < -T::one() {
        return Err(Error::Integrability(format!("κ^s with s = {s} is not integrable at κ = 0")));
    }
    if s == -T::one() && !spec.h().boundary_integral_finite() {
        return Err(Error::Integrability(
            "s = −1 needs ∫κ⁻¹h(κ)dκ < ∞ (log_adjusted with c2 < −1)".into(),
        ));
    }
    Ok(())
}

fn kappa_pieces<T: Real>(s: T, w: T) -> Vec<Piece<T>> {
    let near_zero = if w > T::zero() { Some((s + T::one()) / w) } else { None };
    geometric_pieces(near_zero, None)
}

/// `log I_s(w)` and `log I_{s+1}(w)` with `s > −1`, sharing abscissae.
fn pair_regular<T: Real>(spec: &PriorSpec<T>, s: T, w: T, cfg: &QuadConfig<T>) -> [IntegralResult<T>; 2] {
    let pieces = kappa_pieces(s, w);
    match cfg.scheme {
        Scheme::DoubleExponential => {
            let b = spec.b();
            let h = *spec.h();
            tanh_sinh(&pieces, cfg, |piece, node| {
                let pt = piece.point(node);
                let base = s * pt.ln_kappa - w * pt.kappa
                    + (b - T::one()) * pt.ln_one_minus
                    + h.ln_h_at(pt.kappa, pt.ln_kappa);
                [base, base + pt.ln_kappa]
            })
        }
        Scheme::GaussJacobiComposite => gauss_jacobi_pair(spec, s, w, &pieces, cfg),
    }
}

/// `log I_{−1}(w)` for `h` with `∫κ⁻¹h < ∞`, after the substitution
/// `κ = e^(−t)`; the region `t > 700` is added in closed form.
fn boundary_integral<T: Real>(spec: &PriorSpec<T>, w: T, cfg: &QuadConfig<T>) -> IntegralResult<T> {
    let (c1, c2) = match *spec.h() {
        HFamily::LogAdjusted { c1, c2 } => (c1, c2),
        _ => unreachable!("checked by check_integrable"),
    };
    let b = spec.b();
    let cut = T::lit(BOUNDARY_T);
    let mut cuts = vec![T::zero(), T::one()];
    let mut x = T::lit(2.0);
    while x < cut {
        cuts.push(x);
        x = x * T::lit(2.0);
    }
    cuts.push(cut);
    let pieces: Vec<Piece<T>> = cuts.windows(2).map(|c| Piece::new(c[0], c[1])).collect();
    let [body] = tanh_sinh(&pieces, cfg, |piece, node| {
        let t = piece.lo + node.from_lo;
        // 1 − e^{−t}, accurate for small t on the first panel
        let one_minus = -(-t).exp_m1();
        let kappa = (-t).exp();
        [-w * kappa + (b - T::one()) * one_minus.ln() + c2 * (T::one() + c1 * t).ln()]
    });
    // ∫_T^∞ (1 + c1 t)^c2 dt, the remaining factors being 1 to within e^{−700}.
    let ln_tail = (c2 + T::one()) * (T::one() + c1 * cut).ln() - (c1 * (-c2 - T::one())).ln();
    let mut acc = LogSumExp::new();
    acc.add(body.log_value);
    acc.add(ln_tail);
    IntegralResult {
        log_value: acc.value(),
        ..body
    }
}

/// `log I_s(w) = log ∫₀¹ κ^s e^(−κw) (1−κ)^(b−1) h(κ) dκ`.
pub fn weighted_integral<T: Real>(spec: &PriorSpec<T>, s: T, w: T, cfg: &QuadConfig<T>) -> Result<IntegralResult<T>> {
    cfg.validate()?;
    check_integrable(spec, s, w)?;
    if s == -T::one() {
        return Ok(boundary_integral(spec, w, cfg));
    }
    let [res, _] = pair_regular(spec, s, w, cfg);
    Ok(res)
}

/// `(log I_s(w), log I_{s+1}(w))` on shared abscissae.
pub fn weighted_integral_pair<T: Real>(
    spec: &PriorSpec<T>,
    s: T,
    w: T,
    cfg: &QuadConfig<T>,
) -> Result<[IntegralResult<T>; 2]> {
    cfg.validate()?;
    check_integrable(spec, s, w)?;
    if s == -T::one() {
        let lower = boundary_integral(spec, w, cfg);
        let [upper, _] = pair_regular(spec, T::zero(), w, cfg);
        return Ok([lower, upper]);
    }
    Ok(pair_regular(spec, s, w, cfg))
}

/// `log m(y)` as a function of `‖y‖²`.
pub fn log_marginal<T: Real>(spec: &PriorSpec<T>, y_norm_sq: T, cfg: &QuadConfig<T>) -> Result<T> {
    if !(y_norm_sq >= T::zero() && y_norm_sq.is_finite()) {
        return Err(domain("squared norm of y", y_norm_sq.as_f64(), "[0, ∞)"));
    }
    let half_p = spec.p_real() / T::lit(2.0);
    let s = half_p + spec.a() - T::one();
    let res = weighted_integral(spec, s, y_norm_sq / T::lit(2.0), cfg)?.require_converged()?;
    Ok(-half_p * (T::lit(2.0) * T::PI()).ln() + res.log_value)
}

/// `E[κ | y] = I_{p/2+a}(w) / I_{p/2+a−1}(w)` with `w = ‖y‖²/2`.
pub fn posterior_kappa_mean<T: Real>(spec: &PriorSpec<T>, y_norm_sq: T, cfg: &QuadConfig<T>) -> Result<T> {
    if !(y_norm_sq >= T::zero() && y_norm_sq.is_finite()) {
        return Err(domain("squared norm of y", y_norm_sq.as_f64(), "[0, ∞)"));
    }
    if !spec.classify_propriety().marginal.is_finite() {
        return Err(Error::Integrability(format!(
            "marginal density is infinite for a = {}, p = {}",
            spec.a(),
            spec.p()
        )));
    }
    let s = spec.p_real() / T::lit(2.0) + spec.a() - T::one();
    let [lower, upper] = weighted_integral_pair(spec, s, y_norm_sq / T::lit(2.0), cfg)?;
    let lower = lower.require_converged()?;
    let upper = upper.require_converged()?;
    Ok((upper.log_value - lower.log_value).exp())
}
