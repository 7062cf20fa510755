//! Closed-form firm communication model.
//!
//! A firm splits production among `n` workers. Each hand-off costs `τ` (relative
//! to the wage) and each worker's labor cost on a task range `1/n` is
//! `(1/n)^{1+γ}/γ`, so the firm solves
//!
//! ```text
//! c(τ) = min_n  n·τ + n^{-γ}/γ
//! ```
//!
//! Contacts are treated as a continuous quantity throughout. With
//! `χ = γ/(1+γ)` the optimum is `n* = τ^{-1/(1+γ)}` and `c = τ^χ/χ`. Face-to-face
//! cost falls with normalized density `d` as `τ = d^{-ε}`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Communication cost share `χ` and division-of-labor benefit `γ = χ/(1-χ)`.
///
/// `χ = 0` (with `γ = 0`) is allowed: such a firm has no use for contacts and is
/// never disrupted, but its unit cost is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmParams<T> {
    chi: T,
    gamma: T,
}

impl<T: Real> FirmParams<T> {
    pub fn from_chi(chi: T) -> Result<Self> {
        if !(chi >= T::zero() && chi < T::one()) {
            return Err(Error::domain("chi", chi, "0 <= chi < 1"));
        }
        Ok(Self {
            chi,
            gamma: chi / (T::one() - chi),
        })
    }

    pub fn from_gamma(gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma.is_finite()) {
            return Err(Error::domain("gamma", gamma, "finite gamma >= 0"));
        }
        Ok(Self {
            chi: gamma / (T::one() + gamma),
            gamma,
        })
    }

    pub fn chi(&self) -> T {
        self.chi
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    fn require_division_of_labor(&self) -> Result<()> {
        if self.gamma > T::zero() && self.chi > T::zero() {
            Ok(())
        } else {
            Err(Error::domain("gamma", self.gamma, "gamma > 0"))
        }
    }
}

/// A contact-limiting intervention: at most `contact_cap` face-to-face contacts,
/// optionally with telecommunication available at `telecom_cost` per contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervention<T> {
    contact_cap: T,
    telecom_cost: Option<T>,
}

impl<T: Real> Intervention<T> {
    pub fn new(contact_cap: T, telecom_cost: Option<T>) -> Result<Self> {
        positive("contact_cap", contact_cap)?;
        if let Some(t) = telecom_cost {
            positive("telecom_cost", t)?;
        }
        Ok(Self {
            contact_cap,
            telecom_cost,
        })
    }

    pub fn contact_cap(&self) -> T {
        self.contact_cap
    }

    pub fn telecom_cost(&self) -> Option<T> {
        self.telecom_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Unconstrained,
    Distanced,
    Telecom,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Unconstrained => "unconstrained",
            Regime::Distanced => "distanced",
            Regime::Telecom => "telecom",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Chosen regime and the resulting unit cost relative to the unconstrained optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeOutcome<T> {
    pub regime: Regime,
    pub cost_ratio: T,
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<T> {
    if v > T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(name, v, "finite and > 0"))
    }
}

/// Objective of the firm's problem at an arbitrary (continuous) number of contacts `n`.
pub fn firm_cost<T: Real>(n: T, tau: T, params: &FirmParams<T>) -> Result<T> {
    positive("n", n)?;
    positive("tau", tau)?;
    params.require_division_of_labor()?;
    Ok(n * tau + n.powf(-params.gamma) / params.gamma)
}

/// Cost-minimizing number of contacts, `τ^{-1/(1+γ)}`.
pub fn optimal_contacts<T: Real>(tau: T, params: &FirmParams<T>) -> Result<T> {
    positive("tau", tau)?;
    Ok(tau.powf(-(T::one() + params.gamma).recip()))
}

/// Minimized unit cost, `τ^χ/χ`.
pub fn unit_cost<T: Real>(tau: T, params: &FirmParams<T>) -> Result<T> {
    positive("tau", tau)?;
    params.require_division_of_labor()?;
    Ok(tau.powf(params.chi) / params.chi)
}

/// Face-to-face cost per contact at normalized density `d`, `d^{-ε}`.
pub fn contact_cost_at_density<T: Real>(d: T, eps: T) -> Result<T> {
    positive("d", d)?;
    positive("eps", eps)?;
    Ok(d.powf(-eps))
}

/// Optimal contacts at normalized density `d`, `d^{ε(1-χ)}`.
pub fn contacts_at_density<T: Real>(d: T, eps: T, params: &FirmParams<T>) -> Result<T> {
    positive("d", d)?;
    positive("eps", eps)?;
    Ok(d.powf(eps * (T::one() - params.chi)))
}

/// Unit cost at normalized density `d`, `d^{-εχ}/χ`. Strictly decreasing in `d`.
pub fn unit_cost_at_density<T: Real>(d: T, eps: T, params: &FirmParams<T>) -> Result<T> {
    positive("d", d)?;
    positive("eps", eps)?;
    params.require_division_of_labor()?;
    Ok(d.powf(-eps * params.chi) / params.chi)
}

/// Unit cost under a binding face-to-face cap relative to the optimum,
/// `χx + (1-χ)x^{-γ}` with `x = N/n*`. Returns exactly 1 when `x >= 1`.
pub fn distancing_cost_ratio<T: Real>(cap_ratio: T, params: &FirmParams<T>) -> Result<T> {
    positive("cap_ratio", cap_ratio)?;
    if cap_ratio >= T::one() {
        return Ok(T::one());
    }
    let chi = params.chi;
    Ok(chi * cap_ratio + (T::one() - chi) * cap_ratio.powf(-params.gamma))
}

/// Unit cost when every contact moves to telecommunication, relative to the optimum:
/// `(T·d^ε)^χ`.
///
/// Telecommunication must cost at least as much per contact as meeting in person,
/// `T >= τ = d^{-ε}`; otherwise the firm would already be using it. The bound is on
/// the face-to-face cost `d^{-ε}`, not on `d^{ε}`.
pub fn telecom_cost_ratio<T: Real>(telecom_cost: T, d: T, eps: T, params: &FirmParams<T>) -> Result<T> {
    positive("telecom_cost", telecom_cost)?;
    let face_to_face = contact_cost_at_density(d, eps)?;
    if telecom_cost < face_to_face {
        return Err(Error::TelecomNotCostlier {
            telecom: crate::scalar::as_f64(telecom_cost),
            face_to_face: crate::scalar::as_f64(face_to_face),
        });
    }
    Ok((telecom_cost * d.powf(eps)).powf(params.chi))
}

/// Regime a firm at density `d` picks under `intervention`.
///
/// Unconstrained when `n* <= N`. Otherwise the cheaper of keeping face-to-face
/// contacts at the cap and moving all contacts online; ties keep face-to-face.
/// Telecommunication is only offered when it is strictly costlier per contact than
/// face-to-face contact at this density.
pub fn preferred_regime<T: Real>(
    intervention: &Intervention<T>,
    d: T,
    eps: T,
    params: &FirmParams<T>,
) -> Result<RegimeOutcome<T>> {
    let nstar = contacts_at_density(d, eps, params)?;
    let cap = intervention.contact_cap;
    if nstar <= cap {
        return Ok(RegimeOutcome {
            regime: Regime::Unconstrained,
            cost_ratio: T::one(),
        });
    }
    let distanced = distancing_cost_ratio(cap / nstar, params)?;
    if let Some(t) = intervention.telecom_cost {
        if t > contact_cost_at_density(d, eps)? {
            let telecom = telecom_cost_ratio(t, d, eps, params)?;
            if telecom < distanced {
                return Ok(RegimeOutcome {
                    regime: Regime::Telecom,
                    cost_ratio: telecom,
                });
            }
        }
    }
    Ok(RegimeOutcome {
        regime: Regime::Distanced,
        cost_ratio: distanced,
    })
}

/// Proportional wage subsidy that offsets a face-to-face cap at ratio `x = N/n*`:
///
/// ```text
/// λ = 1 - (1-χ)/(1-χx) · x^γ
/// ```
///
/// Zero for `x >= 1`, tends to 1 as `x → 0`.
pub fn compensating_subsidy<T: Real>(cap_ratio: T, params: &FirmParams<T>) -> Result<T> {
    positive("cap_ratio", cap_ratio)?;
    if cap_ratio >= T::one() {
        return Ok(T::zero());
    }
    let chi = params.chi;
    let denom = T::one() - chi * cap_ratio;
    if denom <= T::zero() {
        return Err(Error::domain("chi * cap_ratio", chi * cap_ratio, "chi * cap_ratio < 1"));
    }
    let lambda = T::one() - (T::one() - chi) / denom * cap_ratio.powf(params.gamma);
    // near x = 0 the exact value can sit closer to 1 than one ulp; keep it strictly below
    let below_one = T::one() - T::epsilon() / lit(2.0);
    Ok(lambda.max(T::zero()).min(below_one))
}

/// Density at which `n*(d) = N`; firms at lower density are unaffected by the cap.
pub fn binding_density<T: Real>(contact_cap: T, eps: T, params: &FirmParams<T>) -> Result<T> {
    positive("contact_cap", contact_cap)?;
    positive("eps", eps)?;
    let exponent = eps * (T::one() - params.chi);
    Ok(contact_cap.powf(exponent.recip()))
}

/// Density above which telecommunication is costlier per contact than face-to-face, `T^{-1/ε}`.
pub fn telecom_admissible_density<T: Real>(telecom_cost: T, eps: T) -> Result<T> {
    positive("telecom_cost", telecom_cost)?;
    positive("eps", eps)?;
    Ok(telecom_cost.powf(-eps.recip()))
}

/// Density where the distancing and telecom cost ratios coincide for a constrained firm.
///
/// Writing both ratios in terms of `x = N/n*` gives
/// `distancing - telecom = χx - A·x^{-γ}` with `A = T^χ N^γ - (1-χ)`, so the
/// crossing is at `x = (A/χ)^{1/(1+γ)}`. `None` when there is no crossing with `x` in `(0,1)`.
pub fn equal_cost_density<T: Real>(intervention: &Intervention<T>, eps: T, params: &FirmParams<T>) -> Result<Option<T>> {
    positive("eps", eps)?;
    let Some(t) = intervention.telecom_cost else {
        return Ok(None);
    };
    params.require_division_of_labor()?;
    let (chi, gamma) = (params.chi, params.gamma);
    let cap = intervention.contact_cap;
    let a = t.powf(chi) * cap.powf(gamma) - (T::one() - chi);
    if !(a > T::zero() && a < chi) {
        return Ok(None);
    }
    let x = (a / chi).powf((T::one() + gamma).recip());
    Ok(Some((cap / x).powf((eps * (T::one() - chi)).recip())))
}
