//! QET with a massless scalar field in 1+1 dimensions.
//!
//! Alice couples a detector to the field momentum with smearing λ at t = 0,
//! Bob couples to the field amplitude with smearing μ at t = T. After Bob's
//! coupling the normal-ordered energy density is
//!
//! ρ(x,t) = ¼λ′(x−t)² + ¼λ′(x+t)² + ¼μ(x−(t−T))² + ¼μ(x+(t−T))²
//!        + K μ(x−(t−T)) P(x−t) + K μ(x+(t−T)) P(x+t),
//!
//! with K = e^{−2‖α‖}⟨σy⟩/(2π) and P(c) = PV∫ λ′(y)/(y−c) dy.
//!
//! The smearing families are normalized as f (plateau 1), g = e^{−z²/2δ²}/√(2π)
//! and h = 1/(π(1+z²/δ²)), each multiplied by an amplitude.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{QetError, Result};
use crate::optim::{golden_section, nelder_mead, nelder_mead_restarts, NelderMeadOptions};
use crate::quad::{integrate, integrate_real_line, integrate_to_infinity, trapezoid, CompositeRule};

/// Shape of a smearing profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Plateau of length σ with smooth ramps of length πδ on each side.
    CompactBump { sigma: f64, delta: f64 },
    Gaussian { delta: f64 },
    Lorentzian { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Bump,
    Gauss,
    Lorentz,
}

impl std::str::FromStr for FamilyKind {
    type Err = QetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(FamilyKind::Bump),
            "gauss" => Ok(FamilyKind::Gauss),
            "lorentz" => Ok(FamilyKind::Lorentz),
            other => Err(QetError::param("family", format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FamilyKind::Bump => "bump",
            FamilyKind::Gauss => "gauss",
            FamilyKind::Lorentz => "lorentz",
        })
    }
}

impl Family {
    pub fn build(kind: FamilyKind, sigma: f64, delta: f64) -> Self {
        match kind {
            FamilyKind::Bump => Family::CompactBump { sigma, delta },
            FamilyKind::Gauss => Family::Gaussian { delta },
            FamilyKind::Lorentz => Family::Lorentzian { delta },
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::CompactBump { .. } => FamilyKind::Bump,
            Family::Gaussian { .. } => FamilyKind::Gauss,
            Family::Lorentzian { .. } => FamilyKind::Lorentz,
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Family::CompactBump { delta, .. } | Family::Gaussian { delta } | Family::Lorentzian { delta } => delta,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Family::CompactBump { sigma, .. } => sigma,
            _ => 0.0,
        }
    }
}

/// S(x) = ½(1 − tanh(cot x)) on (0, π) with its first two derivatives.
fn ramp(x: f64) -> (f64, f64, f64) {
    let (s, c) = x.sin_cos();
    let cot = c / s;
    if !cot.is_finite() || cot.abs() > 300.0 {
        return (if cot > 0.0 { 0.0 } else { 1.0 }, 0.0, 0.0);
    }
    let th = cot.tanh();
    let sech2 = 1.0 / cot.cosh().powi(2);
    let csc2 = 1.0 / (s * s);
    let d1 = 0.5 * sech2 * csc2;
    let d2 = sech2 * csc2 * (th * csc2 - cot);
    (0.5 * (1.0 - th), d1, d2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smearing {
    pub family: Family,
    pub amplitude: f64,
    pub center: f64,
}

impl Smearing {
    pub fn new(family: Family, amplitude: f64, center: f64) -> Result<Self> {
        let s = Self {
            family,
            amplitude,
            center,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(amplitude: f64, delta: f64, center: f64) -> Result<Self> {
        Self::new(Family::Gaussian { delta }, amplitude, center)
    }

    pub fn lorentzian(amplitude: f64, delta: f64, center: f64) -> Result<Self> {
        Self::new(Family::Lorentzian { delta }, amplitude, center)
    }

    pub fn bump(amplitude: f64, sigma: f64, delta: f64, center: f64) -> Result<Self> {
        Self::new(Family::CompactBump { sigma, delta }, amplitude, center)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.family.delta();
        if !(d > 0.0 && d.is_finite()) {
            return Err(QetError::param("delta", format!("must be positive, got {d}")));
        }
        if let Family::CompactBump { sigma, .. } = self.family {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(QetError::param("sigma", format!("must be ≥ 0, got {sigma}")));
            }
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(QetError::param("amplitude", "amplitude and center must be finite"));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.family.delta()
    }

    /// Closed support for the compact family, `None` otherwise.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::CompactBump { sigma, delta } => {
                let r = sigma / 2.0 + PI * delta;
                Some((self.center - r, self.center + r))
            }
            _ => None,
        }
    }

    /// Value (order 0) or derivative (orders 1, 2).
    pub fn eval(&self, x: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(QetError::param("derivative_order", format!("must be ≤ 2, got {order}")));
        }
        Ok(self.eval_unchecked(x, order))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval_unchecked(x, 0)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.eval_unchecked(x, 1)
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.eval_unchecked(x, 2)
    }

    fn eval_unchecked(&self, x: f64, order: u8) -> f64 {
        let z = x - self.center;
        let a = self.amplitude;
        match self.family {
            Family::Gaussian { delta } => {
                let d2 = delta * delta;
                let g = (-z * z / (2.0 * d2)).exp() / (2.0 * PI).sqrt();
                a * match order {
                    0 => g,
                    1 => -z / d2 * g,
                    _ => (z * z / (d2 * d2) - 1.0 / d2) * g,
                }
            }
            Family::Lorentzian { delta } => {
                let u = z / delta;
                let q = 1.0 + u * u;
                a / PI
                    * match order {
                        0 => 1.0 / q,
                        1 => -2.0 * u / (delta * q * q),
                        _ => 2.0 * (3.0 * u * u - 1.0) / (delta * delta * q * q * q),
                    }
            }
            Family::CompactBump { sigma, delta } => {
                let half = sigma / 2.0;
                if z.abs() <= half {
                    return if order == 0 { a } else { 0.0 };
                }
                if z.abs() >= half + PI * delta {
                    return 0.0;
                }
                let (arg, sign) = if z < 0.0 {
                    ((half + PI * delta + z) / delta, 1.0)
                } else {
                    ((half + PI * delta - z) / delta, -1.0)
                };
                let (s0, s1, s2) = ramp(arg);
                a * match order {
                    0 => s0,
                    1 => sign * s1 / delta,
                    _ => s2 / (delta * delta),
                }
            }
        }
    }

    /// Copy with widths and center divided by `upsilon` and the amplitude
    /// multiplied by `amp_factor`.
    pub fn rescaled(&self, upsilon: f64, amp_factor: f64) -> Self {
        let family = match self.family {
            Family::CompactBump { sigma, delta } => Family::CompactBump {
                sigma: sigma / upsilon,
                delta: delta / upsilon,
            },
            Family::Gaussian { delta } => Family::Gaussian { delta: delta / upsilon },
            Family::Lorentzian { delta } => Family::Lorentzian { delta: delta / upsilon },
        };
        Self {
            family,
            amplitude: self.amplitude * amp_factor,
            center: self.center / upsilon,
        }
    }

    /// Magnitude scale used for PV convergence tests: |amplitude|/δ.
    fn pv_scale(&self) -> f64 {
        (self.amplitude.abs() / self.delta()).max(f64::MIN_POSITIVE)
    }
}

/// ∫ f over the region where the smearing lives (real line or support).
fn integrate_over(s: &Smearing, f: &(dyn Fn(f64) -> f64 + Sync), abs_tol: f64, rel_tol: f64) -> f64 {
    match s.support() {
        Some((lo, hi)) => integrate(f, lo, hi, abs_tol, rel_tol).value,
        None => integrate_real_line(f, s.center, abs_tol, rel_tol).value,
    }
}

/// ¼λ′(x−t)² + ¼λ′(x+t)² — the field energy density between the two
/// couplings.
pub fn alice_energy_density(lambda: &Smearing, x: f64, t: f64) -> f64 {
    0.25 * lambda.d1(x - t).powi(2) + 0.25 * lambda.d1(x + t).powi(2)
}

/// Total energy Alice injects, ½∫λ′² dy, by quadrature.
pub fn alice_total_energy(lambda: &Smearing) -> f64 {
    0.5 * integrate_over(lambda, &|y| lambda.d1(y).powi(2), 1e-15, 1e-12)
}

/// Closed form of ½∫λ′² for the Gaussian (λ₀²/(8√π δ)) and Lorentzian
/// (λ₀²/(8π δ)) families.
pub fn alice_total_energy_closed(lambda: &Smearing) -> Option<f64> {
    let a2 = lambda.amplitude.powi(2);
    match lambda.family {
        Family::Gaussian { delta } => Some(a2 / (8.0 * PI.sqrt() * delta)),
        Family::Lorentzian { delta } => Some(a2 / (8.0 * PI * delta)),
        Family::CompactBump { .. } => None,
    }
}

/// |λ̂(k)| = |∫λ(x) e^{ikx} dx|. Analytic for the Gaussian and Lorentzian,
/// Gauss–Legendre over the ramps for the compact family.
pub fn fourier_magnitude(lambda: &Smearing, k: f64) -> f64 {
    let a = lambda.amplitude.abs();
    match lambda.family {
        Family::Gaussian { delta } => a * delta * (-0.5 * k * k * delta * delta).exp(),
        Family::Lorentzian { delta } => a * delta * (-delta * k.abs()).exp(),
        Family::CompactBump { .. } => RampSamples::new(lambda, k.abs()).transform(k).abs(),
    }
}

/// Quadrature samples of λ′ on the right ramp of a compact profile, fine
/// enough to resolve oscillations up to wavenumber `k_max`.
struct RampSamples {
    z: Vec<f64>,
    wd: Vec<f64>,
}

impl RampSamples {
    fn new(lambda: &Smearing, k_max: f64) -> Self {
        let (sigma, delta) = (lambda.family.sigma(), lambda.delta());
        let (lo, hi) = (sigma / 2.0, sigma / 2.0 + PI * delta);
        let panels = 32 + (k_max * (hi - lo) / 2.0).ceil() as usize;
        let rule = CompositeRule::new(lo, hi, panels, 16);
        let wd = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&z, &w)| w * lambda.d1(lambda.center + z))
            .collect();
        Self { z: rule.nodes, wd }
    }

    /// λ̂(k) up to the phase e^{ikc}: by parts, ∫λ cos(kz) = −(2/k)∫_ramp λ′ sin(kz).
    fn transform(&self, k: f64) -> f64 {
        -2.0 * self
            .z
            .iter()
            .zip(&self.wd)
            .map(|(&z, &w)| w * if k == 0.0 { z } else { (k * z).sin() / k })
            .sum::<f64>()
    }
}

/// ‖α‖ = (1/4π) ∫ |k| |λ̂(k)|² dk.
pub fn norm_alpha(lambda: &Smearing) -> Result<f64> {
    let total = match lambda.family {
        Family::Gaussian { .. } | Family::Lorentzian { .. } => {
            let integrand = |k: f64| k * fourier_magnitude(lambda, k).powi(2);
            let r = integrate_to_infinity(&integrand, 0.0, 0.0, 1e-12);
            if !r.converged {
                return Err(QetError::Numerical("‖α‖ k-integral did not converge".into()));
            }
            r.value
        }
        Family::CompactBump { delta, .. } => {
            // Super-polynomial tail: double the cutoff until the last octave
            // contributes below 1e-10 of the running total.
            let mut kmax = 50.0 / delta;
            let samples = RampSamples::new(lambda, kmax);
            let mut acc = integrate(&|k: f64| k * samples.transform(k).powi(2), 0.0, kmax, 0.0, 1e-12).value;
            loop {
                let samples = RampSamples::new(lambda, 2.0 * kmax);
                let tail = integrate(&|k: f64| k * samples.transform(k).powi(2), kmax, 2.0 * kmax, 0.0, 1e-10).value;
                acc += tail;
                kmax *= 2.0;
                if tail.abs() <= 1e-10 * acc.abs() {
                    break;
                }
                if kmax > 1e5 / delta {
                    return Err(QetError::Numerical(format!(
                        "‖α‖ cutoff failure: tail still {tail:.3e} at k = {kmax:.3e}"
                    )));
                }
            }
            acc
        }
    };
    Ok(2.0 * total / (4.0 * PI))
}

/// ‖α‖ through real space: −(1/2π) ∫ λ(x) P(x) dx with P from the folded
/// principal-value route.
pub fn norm_alpha_real_space(lambda: &Smearing) -> f64 {
    let f = |x: f64| lambda.value(x) * pv_folded(lambda, x);
    let tol = 1e-12 * lambda.amplitude.powi(2);
    -integrate_over(lambda, &f, tol, 1e-10) / (2.0 * PI)
}

/// Result of the windowed principal-value evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvResult {
    pub value: f64,
    /// Window half-width of the accepted evaluation.
    pub window: f64,
    pub halvings: usize,
}

/// Outer part ∫_{|y−c|>a} λ′(y)/(y−c) dy, folded onto u = |y−c| > a.
fn pv_outer(lambda: &Smearing, c: f64, a: f64) -> f64 {
    let g = |u: f64| (lambda.d1(c + u) - lambda.d1(c - u)) / u;
    let tol = 1e-13 * lambda.pv_scale();
    match lambda.support() {
        Some((lo, hi)) => {
            let umax = (c - lo).abs().max((hi - c).abs());
            if umax <= a {
                0.0
            } else {
                integrate(&g, a, umax, tol, 1e-12).value
            }
        }
        None => integrate_to_infinity(&g, a, tol, 1e-12).value,
    }
}

/// PV ∫ λ′(y)/(y−c) dy by removing a window |y−c| < a, integrating the rest,
/// and replacing the window by 2aλ″(c). The window starts at `a` and is
/// halved until consecutive results agree to 1e-6 (relative to
/// max(|P|, |λ₀|/δ)).
pub fn pv_integral(lambda: &Smearing, c: f64, a: f64) -> Result<PvResult> {
    let delta = lambda.delta();
    if !(a > 0.0) || a > delta / 10.0 {
        return Err(QetError::param("a", format!("window {a} must lie in (0, δ/10] with δ = {delta}")));
    }
    let eval = |a: f64| pv_outer(lambda, c, a) + 2.0 * a * lambda.d2(c);
    let mut w = a;
    let mut prev = eval(w);
    for halvings in 1..=30 {
        w *= 0.5;
        let cur = eval(w);
        if (cur - prev).abs() <= 1e-6 * cur.abs().max(lambda.pv_scale()) {
            return Ok(PvResult {
                value: cur,
                window: w,
                halvings,
            });
        }
        prev = cur;
    }
    Err(QetError::Numerical(format!("PV window halving did not converge at c = {c}")))
}

/// Default window δ/20.
pub fn pv_default(lambda: &Smearing, c: f64) -> Result<f64> {
    Ok(pv_integral(lambda, c, lambda.delta() / 20.0)?.value)
}

/// PV ∫ λ′(y)/(y−c) dy as ∫_0^∞ [λ′(c+u) − λ′(c−u)]/u du, whose integrand is
/// regular at u = 0 (limit 2λ″(c)). Independent of any window.
pub fn pv_folded(lambda: &Smearing, c: f64) -> f64 {
    let g = |u: f64| {
        if u == 0.0 {
            2.0 * lambda.d2(c)
        } else {
            (lambda.d1(c + u) - lambda.d1(c - u)) / u
        }
    };
    let tol = 1e-13 * lambda.pv_scale();
    match lambda.support() {
        Some((lo, hi)) => {
            let umax = (c - lo).abs().max((hi - c).abs());
            // Split at the kinks where c ± u crosses the ramp boundaries.
            let mut cuts: Vec<f64> = vec![0.0, umax];
            if let Family::CompactBump { sigma, .. } = lambda.family {
                for edge in [lo, lo + (hi - lo - sigma) / 2.0, hi - (hi - lo - sigma) / 2.0, hi] {
                    let u = (edge - c).abs();
                    if u > 0.0 && u < umax {
                        cuts.push(u);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.windows(2).map(|w| integrate(&g, w[0], w[1], tol, 1e-12).value).sum()
        }
        None => {
            let d = lambda.delta();
            integrate(&g, 0.0, d, tol, 1e-12).value + integrate_to_infinity(&g, d, tol, 1e-12).value
        }
    }
}

/// The detector-and-timing configuration of one protocol run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldScenario {
    pub alice: Smearing,
    pub bob: Smearing,
    pub t_signal: f64,
    pub sigma_y_expect: f64,
    pub norm_alpha: f64,
}

impl FieldScenario {
    /// Builds a scenario and computes ‖α‖ from Alice's smearing.
    pub fn new(alice: Smearing, bob: Smearing, t_signal: f64, sigma_y_expect: f64) -> Result<Self> {
        alice.validate()?;
        bob.validate()?;
        if !(t_signal > 0.0 && t_signal.is_finite()) {
            return Err(QetError::param("t_signal", format!("must be positive, got {t_signal}")));
        }
        if !(sigma_y_expect.abs() <= 1.0) {
            return Err(QetError::param("sigma_y", format!("must lie in [−1, 1], got {sigma_y_expect}")));
        }
        Ok(Self {
            alice,
            bob,
            t_signal,
            sigma_y_expect,
            norm_alpha: norm_alpha(&alice)?,
        })
    }

    /// e^{−2‖α‖}⟨σy⟩/(2π).
    pub fn qet_coefficient(&self) -> f64 {
        (-2.0 * self.norm_alpha).exp() * self.sigma_y_expect / (2.0 * PI)
    }

    /// A time after T by which Bob's left- and right-moving packets have
    /// separated.
    pub fn separation_time(&self) -> f64 {
        let spread = match self.bob.family {
            Family::CompactBump { sigma, delta } => sigma + 2.0 * PI * delta,
            Family::Gaussian { delta } => 12.0 * delta,
            Family::Lorentzian { delta } => 40.0 * delta,
        };
        self.t_signal + spread
    }

    /// Where the right-moving packet from Bob sits at time t.
    pub fn well_center_guess(&self, t: f64) -> f64 {
        self.bob.center + (t - self.t_signal)
    }
}

/// Energy density split into its three contributions.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DensityParts {
    pub alice: f64,
    pub bob: f64,
    pub qet: f64,
}

impl DensityParts {
    pub fn total(&self) -> f64 {
        self.alice + self.bob + self.qet
    }
}

/// Contributions to ρ(x, t) for t > T. PV integrals are only evaluated where
/// the multiplying μ is non-zero.
pub fn density_parts(scn: &FieldScenario, x: f64, t: f64) -> Result<DensityParts> {
    if !(t > scn.t_signal) {
        return Err(QetError::param("t", format!("must exceed T = {}, got {t}", scn.t_signal)));
    }
    let dt = t - scn.t_signal;
    let (mu_r, mu_l) = (scn.bob.value(x - dt), scn.bob.value(x + dt));
    let k = scn.qet_coefficient();
    let mut qet = 0.0;
    if k != 0.0 {
        if mu_r != 0.0 {
            qet += k * mu_r * pv_default(&scn.alice, x - t)?;
        }
        if mu_l != 0.0 {
            qet += k * mu_l * pv_default(&scn.alice, x + t)?;
        }
    }
    Ok(DensityParts {
        alice: alice_energy_density(&scn.alice, x, t),
        bob: 0.25 * (mu_r * mu_r + mu_l * mu_l),
        qet,
    })
}

/// ⟨:T₀₀(x,t):⟩ after Bob's coupling.
pub fn energy_density(scn: &FieldScenario, x: f64, t: f64) -> Result<f64> {
    Ok(density_parts(scn, x, t)?.total())
}

/// Densities on a grid, evaluated in parallel.
pub fn density_profile(scn: &FieldScenario, xs: &[f64], t: f64) -> Result<Vec<f64>> {
    xs.par_iter().map(|&x| energy_density(scn, x, t)).collect()
}

/// Co-moving profile of the right-moving packet once Bob's packets have
/// separated: R(s) = ¼λ′(s−T)² + ¼μ(s)² + K_σ μ(s) P(s−T), returned as the
/// ⟨σy⟩-independent part and the QET part per unit ⟨σy⟩.
fn right_moving_parts(alice: &Smearing, bob: &Smearing, t_signal: f64, kappa: f64, s: f64) -> (f64, f64) {
    let mu = bob.value(s);
    let base = 0.25 * alice.d1(s - t_signal).powi(2) + 0.25 * mu * mu;
    let q = if mu == 0.0 {
        0.0
    } else {
        kappa * mu * pv_folded(alice, s - t_signal)
    };
    (base, q)
}

/// Uniform grid on [x_min, x_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_max > x_min) || points < 3 {
            return Err(QetError::param("grid", "need x_max > x_min and at least 3 points"));
        }
        Ok(Self { x_min, x_max, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.x_min + i as f64 * h).collect()
    }

    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..*self
        }
    }

    pub fn scaled(&self, upsilon: f64) -> Self {
        Self {
            x_min: self.x_min / upsilon,
            x_max: self.x_max / upsilon,
            points: self.points,
        }
    }

    /// Window around the right-moving well at time t, 4096 points.
    pub fn around_well(scn: &FieldScenario, t: f64) -> Self {
        let c = scn.well_center_guess(t);
        let half = scn.bob.family.sigma() / 2.0 + 6.0 * scn.bob.delta().max(scn.alice.delta());
        Self {
            x_min: c - half,
            x_max: c + half,
            points: 4096,
        }
    }
}

/// Shape of the negative-energy region.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct WellMetrics {
    pub depth: f64,
    pub width: f64,
    pub delta_x: f64,
    pub delta_e: f64,
    /// Position of the deepest point.
    pub center: f64,
    /// Set when no negative density was found.
    pub empty: bool,
}

/// Metrics of the contiguous negative region around the deepest grid point.
pub fn well_metrics_from_samples(xs: &[f64], rho: &[f64]) -> WellMetrics {
    let (imin, &vmin) = rho
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if vmin >= 0.0 {
        return WellMetrics {
            empty: true,
            ..Default::default()
        };
    }
    let mut lo = imin;
    while lo > 0 && rho[lo - 1] < 0.0 {
        lo -= 1;
    }
    let mut hi = imin;
    while hi + 1 < rho.len() && rho[hi + 1] < 0.0 {
        hi += 1;
    }
    // Interpolated zero crossings bound the well.
    let cross = |i: usize, j: usize| xs[i] + (xs[j] - xs[i]) * rho[i] / (rho[i] - rho[j]);
    let left = if lo > 0 { cross(lo - 1, lo) } else { xs[lo] };
    let right = if hi + 1 < rho.len() { cross(hi, hi + 1) } else { xs[hi] };
    let mut wx = vec![left];
    let mut wy = vec![0.0];
    wx.extend_from_slice(&xs[lo..=hi]);
    wy.extend_from_slice(&rho[lo..=hi]);
    wx.push(right);
    wy.push(0.0);
    let center = xs[imin];
    WellMetrics {
        depth: -vmin,
        width: right - left,
        delta_x: (center - left).min(right - center),
        delta_e: trapezoid(&wx, &wy),
        center,
        empty: false,
    }
}

/// Samples ρ(·, t) on the grid and extracts the well. The grid must resolve
/// the narrowest smearing with at least 50 points per δ.
pub fn well_metrics(scn: &FieldScenario, t: f64, grid: &Grid) -> Result<WellMetrics> {
    let dmin = scn.alice.delta().min(scn.bob.delta());
    if grid.spacing() > dmin / 50.0 {
        return Err(QetError::param(
            "grid",
            format!("spacing {:.3e} does not resolve δ = {dmin:.3e} (need ≥ 50 points per δ)", grid.spacing()),
        ));
    }
    let xs = grid.xs();
    let rho = density_profile(scn, &xs, t)?;
    Ok(well_metrics_from_samples(&xs, &rho))
}

/// Box for one optimized quantity; lo == hi pins it.
pub type Bound = (f64, f64);

/// Search box of `optimize_scenario`. Bob sits at x_B = T + offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioBounds {
    pub offset: Bound,
    pub delta_a: Bound,
    pub delta_b: Bound,
    pub sigma_a: Bound,
    pub sigma_b: Bound,
    pub t_signal: Bound,
    pub lambda0: Bound,
    pub mu0: Bound,
}

impl ScenarioBounds {
    /// Both widths pinned to δ; for the compact family Alice's plateau is
    /// pinned to δ and Bob's may range over [0, 4δ].
    pub fn matched(kind: FamilyKind, delta: f64) -> Self {
        let (plateau_a, plateau_b) = if kind == FamilyKind::Bump {
            ((delta, delta), (0.0, 4.0 * delta))
        } else {
            ((0.0, 0.0), (0.0, 0.0))
        };
        Self {
            offset: (-3.0 * delta, 3.0 * delta),
            delta_a: (delta, delta),
            delta_b: (delta, delta),
            sigma_a: plateau_a,
            sigma_b: plateau_b,
            t_signal: (10.0 * delta, 10.0 * delta),
            lambda0: (0.1, 5.0),
            mu0: (0.01 / delta, 5.0 / delta),
        }
    }

    fn all(&self) -> [Bound; 8] {
        [
            self.offset,
            self.delta_a,
            self.delta_b,
            self.sigma_a,
            self.sigma_b,
            self.t_signal,
            self.lambda0,
            self.mu0,
        ]
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in self.all() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(QetError::param("bounds", format!("invalid interval [{lo}, {hi}]")));
            }
        }
        if self.delta_a.0 <= 0.0 || self.delta_b.0 <= 0.0 || self.t_signal.0 <= 0.0 {
            return Err(QetError::param("bounds", "widths and T must be positive"));
        }
        Ok(())
    }
}

/// Outcome of a scenario optimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizedScenario {
    pub scenario: FieldScenario,
    /// Depth of the co-moving right-moving well, max(0, −min R).
    pub depth: f64,
    pub evals: usize,
}

/// ‖α‖ is quadratic in the amplitude, so the optimizer only needs it once
/// per Alice shape.
struct NormCache(std::sync::Mutex<std::collections::HashMap<(u64, u64), f64>>);

impl NormCache {
    fn unit_norm(&self, kind: FamilyKind, sigma: f64, delta: f64) -> Result<f64> {
        let key = (sigma.to_bits(), delta.to_bits());
        if let Some(&v) = self.0.lock().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let v = norm_alpha(&Smearing::new(Family::build(kind, sigma, delta), 1.0, 0.0)?)?;
        self.0.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }
}

fn scenario_from_params(kind: FamilyKind, p: &[f64; 8], sigma_y: f64, cache: &NormCache) -> Result<FieldScenario> {
    let [offset, da, db, sa, sb, t, l0, m0] = *p;
    let alice = Smearing::new(Family::build(kind, sa, da), l0, 0.0)?;
    let bob = Smearing::new(Family::build(kind, sb, db), m0, t + offset)?;
    if !(t > 0.0) {
        return Err(QetError::param("t_signal", "must be positive"));
    }
    Ok(FieldScenario {
        alice,
        bob,
        t_signal: t,
        sigma_y_expect: sigma_y,
        norm_alpha: l0 * l0 * cache.unit_norm(kind, sa, da)?,
    })
}

/// Depth of the right-moving well and the ⟨σy⟩ sign that produces it.
fn comoving_depth(scn: &FieldScenario) -> (f64, f64) {
    let kappa = (-2.0 * scn.norm_alpha).exp() / (2.0 * PI);
    let bob = &scn.bob;
    let half = bob.family.sigma() / 2.0 + 3.0 * bob.delta();
    let n = 61;
    let ss: Vec<f64> = (0..n)
        .map(|i| bob.center - half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect();
    let parts: Vec<(f64, f64)> = ss
        .iter()
        .map(|&s| right_moving_parts(&scn.alice, bob, scn.t_signal, kappa, s))
        .collect();
    let mut best = (f64::INFINITY, 1.0, 0usize);
    for sign in [1.0, -1.0] {
        for (i, (b, q)) in parts.iter().enumerate() {
            let v = b + sign * q;
            if v < best.0 {
                best = (v, sign, i);
            }
        }
    }
    let (_, sign, i) = best;
    let step = 2.0 * half / (n - 1) as f64;
    let (_, v) = golden_section(
        |s| {
            let (b, q) = right_moving_parts(&scn.alice, bob, scn.t_signal, kappa, s);
            b + sign * q
        },
        ss[i] - step,
        ss[i] + step,
        1e-9 * bob.delta(),
    );
    ((-v.min(best.0)).max(0.0), sign)
}

/// Maximizes the depth of the negative-energy well over the free entries of
/// the box with Nelder–Mead restarts (restart 0 at the box midpoint).
/// ⟨σy⟩ is set to whichever of ±1 makes the QET terms negative.
pub fn optimize_scenario(
    kind: FamilyKind,
    bounds: &ScenarioBounds,
    restarts: usize,
    seed: u64,
    opts: &NelderMeadOptions,
) -> Result<OptimizedScenario> {
    bounds.validate()?;
    let all = bounds.all();
    let free: Vec<usize> = (0..8).filter(|&i| all[i].1 > all[i].0).collect();
    let full = |x: &[f64]| -> [f64; 8] {
        let mut p = [0.0; 8];
        for i in 0..8 {
            p[i] = 0.5 * (all[i].0 + all[i].1);
        }
        for (j, &i) in free.iter().enumerate() {
            p[i] = x[j];
        }
        p
    };
    let cache = NormCache(Default::default());
    let objective = |x: &[f64]| -> f64 {
        match scenario_from_params(kind, &full(x), 1.0, &cache) {
            Ok(s) => -comoving_depth(&s).0,
            Err(_) => f64::INFINITY,
        }
    };
    let fb: Vec<Bound> = free.iter().map(|&i| all[i]).collect();
    let mid: Vec<f64> = fb.iter().map(|b| 0.5 * (b.0 + b.1)).collect();
    let best = if opts.max_evals == 0 || free.is_empty() {
        nelder_mead(&objective, &mid, &fb, &NelderMeadOptions { max_evals: 0, ..opts.clone() })
    } else {
        nelder_mead_restarts(&objective, Some(&mid), &fb, restarts, seed, opts)
    };
    let p = full(&best.x);
    let probe = scenario_from_params(kind, &p, 1.0, &cache)?;
    let (depth, sign) = comoving_depth(&probe);
    let [offset, da, db, sa, sb, t, l0, m0] = p;
    let alice = Smearing::new(Family::build(kind, sa, da), l0, 0.0)?;
    let bob = Smearing::new(Family::build(kind, sb, db), m0, t + offset)?;
    Ok(OptimizedScenario {
        scenario: FieldScenario::new(alice, bob, t, sign)?,
        depth,
        evals: best.evals,
    })
}

/// Υ rescaling in n spacetime dimensions (only n = 2 is supported).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingLaw {
    pub upsilon: f64,
    pub n_dims: u32,
}

impl ScalingLaw {
    pub fn new(upsilon: f64, n_dims: u32) -> Result<Self> {
        if n_dims != 2 {
            return Err(QetError::param("n_dims", format!("only n = 2 is supported, got {n_dims}")));
        }
        if !(upsilon > 0.0 && upsilon.is_finite()) {
            return Err(QetError::param("upsilon", format!("must be positive, got {upsilon}")));
        }
        Ok(Self { upsilon, n_dims })
    }

    /// ξ = n/2.
    pub fn xi(&self) -> f64 {
        self.n_dims as f64 / 2.0
    }
}

/// λ → Υ^{(n−2)/2} λ(Υx), μ → Υ^{n/2} μ(Υx), with times and positions
/// divided by Υ; ‖α‖ is recomputed.
pub fn scaling_transform(scn: &FieldScenario, law: &ScalingLaw) -> Result<FieldScenario> {
    let u = law.upsilon;
    let n = law.n_dims as f64;
    let alice = scn.alice.rescaled(u, u.powf((n - 2.0) / 2.0));
    let bob = scn.bob.rescaled(u, u.powf(law.xi()));
    FieldScenario::new(alice, bob, scn.t_signal / u, scn.sigma_y_expect)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub upsilon: f64,
    pub metrics: WellMetrics,
    pub norm_alpha: f64,
}

/// Log-log fits over a scaling study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub width_exponent: f64,
    pub depth_exponent: f64,
    /// max |‖α‖_Υ/‖α‖₁ − 1|.
    pub norm_alpha_drift: f64,
    /// (max − min)/mean of |ΔE·Δx|.
    pub product_spread: f64,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Rescales `scn` by each Υ, measures the well at the mapped time t/Υ on the
/// mapped grid, and fits the scaling exponents.
pub fn scaling_study(scn: &FieldScenario, upsilons: &[f64], t: f64, grid: &Grid) -> Result<(Vec<ScalingRow>, ScalingFit)> {
    if upsilons.len() < 2 {
        return Err(QetError::param("upsilons", "need at least two values"));
    }
    let mut rows = Vec::with_capacity(upsilons.len());
    for &u in upsilons {
        let s = scaling_transform(scn, &ScalingLaw::new(u, 2)?)?;
        let m = well_metrics(&s, t / u, &grid.scaled(u))?;
        if m.empty {
            return Err(QetError::InvalidState(format!("no negative well at Υ = {u}")));
        }
        rows.push(ScalingRow {
            upsilon: u,
            metrics: m,
            norm_alpha: s.norm_alpha,
        });
    }
    let lu: Vec<f64> = rows.iter().map(|r| r.upsilon.ln()).collect();
    let lw: Vec<f64> = rows.iter().map(|r| r.metrics.width.ln()).collect();
    let ld: Vec<f64> = rows.iter().map(|r| r.metrics.depth.ln()).collect();
    let a0 = rows[0].norm_alpha;
    let drift = rows.iter().map(|r| (r.norm_alpha / a0 - 1.0).abs()).fold(0.0, f64::max);
    let prods: Vec<f64> = rows.iter().map(|r| (r.metrics.delta_e * r.metrics.delta_x).abs()).collect();
    let mean = prods.iter().sum::<f64>() / prods.len() as f64;
    let spread = (prods.iter().cloned().fold(f64::MIN, f64::max) - prods.iter().cloned().fold(f64::MAX, f64::min)) / mean;
    Ok((
        rows,
        ScalingFit {
            width_exponent: slope(&lu, &lw),
            depth_exponent: slope(&lu, &ld),
            norm_alpha_drift: drift,
            product_spread: spread,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn smearing_point_values() {
        let g = Smearing::gaussian(1.7, 0.8, 0.3).unwrap();
        assert_eq!(g.eval(0.3, 1).unwrap(), 0.0);
        let l = Smearing::lorentzian(2.0, 0.5, 0.0).unwrap();
        assert!((l.value(0.0) - 2.0 / PI).abs() < 1e-15);
        let b = Smearing::bump(1.3, 2.0, 0.5, 0.0).unwrap();
        assert_eq!(b.value(0.7), 1.3);
        assert_eq!(b.value(1.0 + PI * 0.5 + 1e-9), 0.0);
        assert!(g.eval(0.0, 3).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fams = [
            Smearing::gaussian(1.1, 0.7, 0.2).unwrap(),
            Smearing::lorentzian(0.9, 0.4, -0.1).unwrap(),
            Smearing::bump(1.0, 1.0, 0.6, 0.0).unwrap(),
        ];
        let h = 1e-5;
        for s in fams {
            for x in [-1.9, -1.2, -0.7, 0.05, 0.55, 1.3] {
                let d1 = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
                let d2 = (s.d1(x + h) - s.d1(x - h)) / (2.0 * h);
                assert!((d1 - s.d1(x)).abs() < 1e-7 * (1.0 + d1.abs()), "{s:?} x={x}");
                assert!((d2 - s.d2(x)).abs() < 1e-6 * (1.0 + d2.abs()), "{s:?} x={x}");
            }
        }
    }

    #[test]
    fn bump_ramp_is_continuous() {
        let b = Smearing::bump(1.0, 1.0, 0.3, 0.0).unwrap();
        assert!((b.value(0.5 + 1e-12) - 1.0).abs() < 1e-9);
        assert!(b.value(0.5 + PI * 0.3 - 1e-9).abs() < 1e-12);
    }

    #[test]
    fn alice_energy_closed_forms() {
        for s in [Smearing::gaussian(1.3, 0.6, 0.0).unwrap(), Smearing::lorentzian(0.8, 1.7, 0.4).unwrap()] {
            let num = alice_total_energy(&s);
            assert!(rel(num, alice_total_energy_closed(&s).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn alice_density_mirror_symmetry() {
        let s = Smearing::gaussian(1.0, 0.5, 0.0).unwrap();
        assert_eq!(alice_energy_density(&s, 0.8, 1.5), alice_energy_density(&s, 0.8, -1.5));
        let b = Smearing::bump(1.0, 0.5, 0.2, 0.0).unwrap();
        assert_eq!(alice_energy_density(&b, 3.0, 0.0), 0.0);
    }

    #[test]
    fn norm_alpha_closed_forms_and_routes() {
        let g = Smearing::gaussian(1.3, 0.7, 0.0).unwrap();
        assert!(rel(norm_alpha(&g).unwrap(), 1.3f64.powi(2) / (4.0 * PI)) < 1e-9);
        let l = Smearing::lorentzian(1.3, 0.7, 2.0).unwrap();
        assert!(rel(norm_alpha(&l).unwrap(), 1.3f64.powi(2) / (8.0 * PI)) < 1e-9);
        for s in [g, l, Smearing::bump(1.1, 0.8, 0.4, 0.0).unwrap()] {
            let k = norm_alpha(&s).unwrap();
            let r = norm_alpha_real_space(&s);
            assert!(rel(k, r) < 1e-6, "{s:?}: {k} vs {r}");
        }
    }

    #[test]
    fn norm_alpha_quadratic_in_amplitude() {
        let b = Smearing::bump(1.0, 0.5, 0.3, 0.0).unwrap();
        let b2 = Smearing { amplitude: 2.0, ..b };
        assert!(rel(norm_alpha(&b2).unwrap(), 4.0 * norm_alpha(&b).unwrap()) < 1e-9);
    }

    #[test]
    fn pv_oracles() {
        let g = Smearing::gaussian(1.4, 0.6, 0.2).unwrap();
        let p = pv_default(&g, 0.2).unwrap();
        assert!(rel(p, -1.4 / 0.6) < 1e-6);
        let l = Smearing::lorentzian(1.4, 0.6, 0.2).unwrap();
        for c in [-1.0, 0.2, 0.5, 3.0] {
            let w: f64 = (c - 0.2) / 0.6;
            let exact = -(1.4 / 0.6) * (1.0 - w * w) / (1.0 + w * w).powi(2);
            assert!((pv_default(&l, c).unwrap() - exact).abs() < 2e-6 * 1.4 / 0.6);
            assert!((pv_folded(&l, c) - exact).abs() < 1e-9);
        }
        // P is even about the center of a symmetric profile
        let flat = Smearing::bump(1.0, 3.0, 0.2, 0.0).unwrap();
        assert!((pv_folded(&flat, 0.7) - pv_folded(&flat, -0.7)).abs() < 1e-10);
        assert!(pv_integral(&g, 0.0, 0.2).is_err());
    }

    #[test]
    fn pv_routes_agree_and_are_window_stable() {
        let b = Smearing::bump(1.0, 0.6, 0.4, 0.0).unwrap();
        for c in [-0.9, -0.2, 0.0, 0.45, 1.1] {
            let a = pv_integral(&b, c, 0.02).unwrap().value;
            let a2 = pv_integral(&b, c, 0.01).unwrap().value;
            let f = pv_folded(&b, c);
            assert!((a - f).abs() < 2e-6 * f.abs().max(2.5), "c={c}: {a} vs {f}");
            assert!((a - a2).abs() < 2e-6 * f.abs().max(2.5));
        }
    }

    fn gauss_scenario(sigma_y: f64) -> FieldScenario {
        let a = Smearing::gaussian(PI.sqrt(), 1.0, 0.0).unwrap();
        let b = Smearing::gaussian(0.86, 1.0, 10.0).unwrap();
        FieldScenario::new(a, b, 10.0, sigma_y).unwrap()
    }

    #[test]
    fn no_feedback_is_nonnegative() {
        let s = gauss_scenario(0.0);
        for x in [-12.0, 0.0, 9.5, 14.0, 22.0] {
            assert!(energy_density(&s, x, 14.0).unwrap() >= 0.0);
        }
        let g = Grid::new(10.0, 22.0, 801).unwrap();
        assert!(well_metrics(&s, 16.0, &g).unwrap().empty);
    }

    #[test]
    fn causal_support_for_compact_profiles() {
        let a = Smearing::bump(1.0, 0.5, 0.2, 0.0).unwrap();
        let b = Smearing::bump(0.7, 0.5, 0.2, 5.0).unwrap();
        let s = FieldScenario::new(a, b, 5.0, 1.0).unwrap();
        for x in [-20.0, -3.0, 2.0, 11.0, 30.0] {
            assert_eq!(energy_density(&s, x, 6.0).unwrap(), 0.0, "x={x}");
        }
        assert!(energy_density(&s, 6.0, 6.0).unwrap() != 0.0);
    }

    #[test]
    fn time_must_follow_bob() {
        let s = gauss_scenario(1.0);
        assert!(energy_density(&s, 0.0, 5.0).is_err());
    }

    #[test]
    fn gaussian_scenario_has_well() {
        let s = gauss_scenario(1.0);
        let t = s.separation_time();
        let m = well_metrics(&s, t, &Grid::around_well(&s, t)).unwrap();
        assert!(!m.empty && m.delta_e < 0.0);
        // pointwise bound 1/(4πe δ²) for the Gaussian family
        assert!(m.depth <= 1.0 / (4.0 * PI * 1f64.exp()) + 1e-9);
        assert!(m.depth > 0.5 / (4.0 * PI * 1f64.exp()));
    }

    #[test]
    fn scaling_identity() {
        let s = gauss_scenario(1.0);
        let same = scaling_transform(&s, &ScalingLaw::new(1.0, 2).unwrap()).unwrap();
        assert_eq!(same, s);
        assert!(ScalingLaw::new(2.0, 4).is_err());
    }

    #[test]
    fn optimizer_zero_evals_returns_midpoint() {
        let b = ScenarioBounds::matched(FamilyKind::Gauss, 1.0);
        let o = NelderMeadOptions {
            max_evals: 0,
            ..Default::default()
        };
        let r = optimize_scenario(FamilyKind::Gauss, &b, 3, 1, &o).unwrap();
        assert_eq!(r.scenario.bob.center, 10.0);
        assert!((r.scenario.alice.amplitude - 2.55).abs() < 1e-12);
    }
}
