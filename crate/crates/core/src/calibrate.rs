//! Calibration of the density elasticity `ε` and the contact cap `N`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{RegionCell, RegionDensity};
use crate::industry::{Group, MixResolver};
use crate::model::{self, FirmParams};
use crate::scalar::{as_f64, compensated_sum, lit, weighted_slope, CompensatedSum, Real};

/// A ZIP × industry cell joined with its industry's communication share and its region's density.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCell<T> {
    pub zcta: String,
    /// Detailed NAICS code of the cell.
    pub industry_code: String,
    /// Industry (sector) the code resolved to.
    pub sector: String,
    pub employment: T,
    pub density: T,
    pub chi: T,
}

#[derive(Debug, Clone, Default)]
pub struct JoinReport<T> {
    pub cells: Vec<ModelCell<T>>,
    pub missing_density: Vec<(String, String)>,
    pub unresolved: Vec<(String, String)>,
}

/// Attaches communication shares and normalized densities to cells with positive employment.
pub fn join_cells<T: Real>(
    cells: &[RegionCell<T>],
    resolver: &MixResolver<'_, T>,
    densities: &BTreeMap<String, RegionDensity<T>>,
) -> JoinReport<T> {
    let mut report = JoinReport::default();
    for c in cells.iter().filter(|c| c.employment > T::zero()) {
        let Some(resolved) = resolver.resolve(&c.industry_code) else {
            report.unresolved.push((c.zcta.clone(), c.industry_code.clone()));
            continue;
        };
        let Some(density) = densities.get(&c.zcta) else {
            log::warn!("zcta {} naics {}: no density; cell skipped", c.zcta, c.industry_code);
            report.missing_density.push((c.zcta.clone(), c.industry_code.clone()));
            continue;
        };
        report.cells.push(ModelCell {
            zcta: c.zcta.clone(),
            industry_code: c.industry_code.clone(),
            sector: resolved.mix.industry_code.clone(),
            employment: c.employment,
            density: density.normalized_density,
            chi: resolved.mix.chi.get(Group::Communication),
        });
    }
    report.cells.sort_by(|a, b| (&a.zcta, &a.industry_code).cmp(&(&b.zcta, &b.industry_code)));
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonFit<T> {
    pub eps: T,
    /// Slope of `χ_i ln d_r` on `ln d_r`; the model-implied elasticity is `ε·k`.
    pub k: T,
    /// Re-estimated slope of `ε χ_i ln d_r` on `ln d_r`.
    pub achieved_slope: T,
}

fn regression_points<T: Real>(cells: &[ModelCell<T>], eps: T) -> Vec<(T, T, T)> {
    cells
        .iter()
        .map(|c| {
            let ln_d = c.density.ln();
            (ln_d, eps * c.chi * ln_d, c.employment)
        })
        .collect()
}

/// Employment-weighted slope factor `k = Cov_w(χ ln d, ln d) / Var_w(ln d)`.
pub fn slope_factor<T: Real>(cells: &[ModelCell<T>]) -> Result<T> {
    if cells.is_empty() {
        return Err(Error::Calibration("no cells to regress on".into()));
    }
    if cells.iter().any(|c| !(c.employment > T::zero() && c.density > T::zero())) {
        return Err(Error::Calibration(
            "regression needs positive employment weights and densities".into(),
        ));
    }
    weighted_slope(&regression_points(cells, T::one()))
        .ok_or_else(|| Error::Calibration("need at least two distinct densities".into()))
}

/// Solves `ε = target / k` and re-runs the regression at that `ε` to confirm the slope.
pub fn calibrate_epsilon<T: Real>(cells: &[ModelCell<T>], target_elasticity: T) -> Result<EpsilonFit<T>> {
    if !(target_elasticity > T::zero() && target_elasticity.is_finite()) {
        return Err(Error::Argument(format!("target elasticity {target_elasticity} must be > 0")));
    }
    let k = slope_factor(cells)?;
    if !(k > T::zero()) {
        return Err(Error::Calibration(format!(
            "slope factor k = {k} is not positive; elasticity target unreachable"
        )));
    }
    let eps = target_elasticity / k;
    let fit = fit_at(cells, eps, k)?;
    let tol = T::check_tolerance() * target_elasticity.abs().max(T::one());
    if (fit.achieved_slope - target_elasticity).abs() > tol {
        return Err(Error::Calibration(format!(
            "re-regression slope {} misses target {target_elasticity}",
            fit.achieved_slope
        )));
    }
    Ok(fit)
}

/// Regression diagnostics for a given (e.g. externally fixed) `ε`.
pub fn epsilon_fit<T: Real>(cells: &[ModelCell<T>], eps: T) -> Result<EpsilonFit<T>> {
    let k = slope_factor(cells)?;
    fit_at(cells, eps, k)
}

fn fit_at<T: Real>(cells: &[ModelCell<T>], eps: T, k: T) -> Result<EpsilonFit<T>> {
    let achieved_slope = weighted_slope(&regression_points(cells, eps))
        .ok_or_else(|| Error::Calibration("need at least two distinct densities".into()))?;
    Ok(EpsilonFit { eps, k, achieved_slope })
}

/// A cell with its optimal number of contacts `n*_ir`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactCell<T> {
    pub zcta: String,
    pub industry_code: String,
    pub sector: String,
    pub employment: T,
    pub density: T,
    pub chi: T,
    pub nstar: T,
}

/// `n*_ir = d_r^{ε(1-χ_i)}` for every cell.
pub fn optimal_contacts_grid<T: Real>(cells: &[ModelCell<T>], eps: T) -> Result<Vec<ContactCell<T>>> {
    cells
        .par_iter()
        .map(|c| {
            let params = FirmParams::from_chi(c.chi)
                .map_err(|e| Error::Calibration(format!("sector {}: {e}", c.sector)))?;
            let nstar = model::contacts_at_density(c.density, eps, &params)?;
            Ok(ContactCell {
                zcta: c.zcta.clone(),
                industry_code: c.industry_code.clone(),
                sector: c.sector.clone(),
                employment: c.employment,
                density: c.density,
                chi: c.chi,
                nstar,
            })
        })
        .collect()
}

fn total_contacts<T: Real>(grid: &[ContactCell<T>]) -> T {
    compensated_sum(grid.iter().map(|c| c.employment * c.nstar))
}

fn capped_contacts<T: Real>(grid: &[ContactCell<T>], cap: T) -> T {
    compensated_sum(grid.iter().map(|c| c.employment * c.nstar.min(cap)))
}

/// `Σ l min(N, n*) / Σ l n*`.
pub fn contact_share<T: Real>(grid: &[ContactCell<T>], cap: T) -> T {
    capped_contacts(grid, cap) / total_contacts(grid)
}

fn check_cap_inputs<T: Real>(grid: &[ContactCell<T>], target_share: T) -> Result<(T, T)> {
    if !(target_share > T::zero() && target_share <= T::one()) {
        return Err(Error::Argument(format!(
            "target contact share {target_share} must lie in (0, 1]"
        )));
    }
    let total = total_contacts(grid);
    if !(total > T::zero() && total.is_finite()) {
        return Err(Error::Calibration("aggregate contacts are not positive".into()));
    }
    let max = grid.iter().map(|c| c.nstar).fold(T::zero(), T::max);
    Ok((total, max))
}

/// Contact cap `N` with `Σ l min(N, n*) = share · Σ l n*`, by bisection on `[0, max n*]`.
pub fn calibrate_cap<T: Real>(grid: &[ContactCell<T>], target_share: T) -> Result<T> {
    let (total, max) = check_cap_inputs(grid, target_share)?;
    if target_share == T::one() {
        return Ok(max);
    }
    let goal = target_share * total;
    let abs_tol = lit::<T>(1e-10).max(max * T::epsilon() * lit(4.0));
    let (mut lo, mut hi) = (T::zero(), max);
    for _ in 0..400 {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = capped_contacts(grid, mid);
        if value < goal {
            lo = mid;
        } else {
            hi = mid;
        }
        let residual = (capped_contacts(grid, (lo + hi) / lit(2.0)) - goal).abs();
        if hi - lo <= abs_tol && residual <= goal * T::epsilon() * lit(64.0) {
            break;
        }
    }
    let cap = (lo + hi) / lit(2.0);
    let residual = (capped_contacts(grid, cap) - goal).abs() / goal;
    if residual > T::check_tolerance() * lit(10.0) {
        return Err(Error::Calibration(format!(
            "contact cap {cap} leaves relative residual {}",
            as_f64(residual)
        )));
    }
    Ok(cap)
}

/// Exact solution of the piecewise-linear cap equation by sorting cells on `n*`.
pub fn calibrate_cap_exact<T: Real>(grid: &[ContactCell<T>], target_share: T) -> Result<T> {
    let (total, max) = check_cap_inputs(grid, target_share)?;
    if target_share == T::one() {
        return Ok(max);
    }
    let goal = target_share * total;
    let mut sorted: Vec<(T, T)> = grid.iter().map(|c| (c.nstar, c.employment)).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite n*"));
    // below the j-th smallest n*, f(N) = (contacts of cells under N) + N · (employment at or above)
    let mut below = CompensatedSum::new();
    let mut above = compensated_sum(sorted.iter().map(|&(_, l)| l));
    for &(nstar, l) in &sorted {
        let at_knot = below.value() + nstar * above;
        if at_knot >= goal {
            return Ok((goal - below.value()) / above);
        }
        below.add(l * nstar);
        above = above - l;
    }
    Ok(max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets<T> {
    pub contact_share: T,
    pub elasticity: T,
}

impl<T: Real> Default for Targets<T> {
    fn default() -> Self {
        Self {
            contact_share: lit(0.5),
            elasticity: lit(0.04),
        }
    }
}

/// Everything the subsidy computation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel<T> {
    pub eps: T,
    pub contact_cap: T,
    pub industry_params: BTreeMap<String, FirmParams<T>>,
    pub target_contact_share: T,
    pub target_elasticity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport<T> {
    pub eps: T,
    pub eps_fixed: bool,
    pub k: T,
    pub achieved_slope: T,
    pub contact_cap: T,
    pub achieved_share: T,
    pub cells: usize,
    pub regions: usize,
    pub industries: usize,
}

#[derive(Debug, Clone)]
pub struct Calibration<T> {
    pub model: CalibratedModel<T>,
    pub report: CalibrationReport<T>,
    pub contacts: Vec<ContactCell<T>>,
}

/// Calibrates `ε` (unless fixed) and then `N` on the joined cells.
pub fn calibrate<T: Real>(cells: &[ModelCell<T>], targets: &Targets<T>, fixed_eps: Option<T>) -> Result<Calibration<T>> {
    let fit = match fixed_eps {
        Some(eps) => {
            if !(eps > T::zero() && eps.is_finite()) {
                return Err(Error::Argument(format!("fixed eps {eps} must be > 0")));
            }
            epsilon_fit(cells, eps)?
        }
        None => calibrate_epsilon(cells, targets.elasticity)?,
    };
    let contacts = optimal_contacts_grid(cells, fit.eps)?;
    let contact_cap = calibrate_cap(&contacts, targets.contact_share)?;
    let achieved_share = contact_share(&contacts, contact_cap);

    let mut industry_params = BTreeMap::new();
    for c in cells {
        if !industry_params.contains_key(&c.sector) {
            industry_params.insert(c.sector.clone(), FirmParams::from_chi(c.chi)?);
        }
    }
    let regions = {
        let mut z: Vec<&str> = cells.iter().map(|c| c.zcta.as_str()).collect();
        z.dedup();
        z.len()
    };
    let report = CalibrationReport {
        eps: fit.eps,
        eps_fixed: fixed_eps.is_some(),
        k: fit.k,
        achieved_slope: fit.achieved_slope,
        contact_cap,
        achieved_share,
        cells: cells.len(),
        regions,
        industries: industry_params.len(),
    };
    log::info!(
        "calibrated eps = {} (k = {}, slope {}), N = {} (share {})",
        report.eps,
        report.k,
        report.achieved_slope,
        report.contact_cap,
        report.achieved_share
    );
    Ok(Calibration {
        model: CalibratedModel {
            eps: fit.eps,
            contact_cap,
            industry_params,
            target_contact_share: targets.contact_share,
            target_elasticity: targets.elasticity,
        },
        report,
        contacts,
    })
}
