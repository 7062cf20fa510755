//! Subsidies under the calibrated contact cap, their aggregation, and cost curves over density.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::calibrate::{CalibratedModel, ContactCell};
use crate::error::{Error, Result};
use crate::model::{self, FirmParams, Intervention, Regime};
use crate::scalar::{lit, CompensatedSum, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsidyResult<T> {
    pub zcta: String,
    pub industry_code: String,
    pub sector: String,
    pub nstar: T,
    /// `min(1, N/n*)`.
    pub cap_ratio: T,
    pub lambda: T,
    pub employment: T,
    /// Only set when a telecommunication cost is supplied.
    pub regime: Option<Regime>,
}

/// Compensating subsidy for every cell at the calibrated cap.
///
/// Results keep the order of `contacts`.
pub fn compute_subsidies<T: Real>(
    calibrated: &CalibratedModel<T>,
    contacts: &[ContactCell<T>],
    telecom_cost: Option<T>,
) -> Result<Vec<SubsidyResult<T>>> {
    let intervention = Intervention::new(calibrated.contact_cap, telecom_cost)?;
    contacts
        .par_iter()
        .map(|c| {
            let params = match calibrated.industry_params.get(&c.sector) {
                Some(p) => *p,
                None => FirmParams::from_chi(c.chi)?,
            };
            let cap_ratio = (calibrated.contact_cap / c.nstar).min(T::one());
            let lambda = model::compensating_subsidy(cap_ratio, &params)?;
            let regime = match telecom_cost {
                Some(_) => Some(model::preferred_regime(&intervention, c.density, calibrated.eps, &params)?.regime),
                None => None,
            };
            Ok(SubsidyResult {
                zcta: c.zcta.clone(),
                industry_code: c.industry_code.clone(),
                sector: c.sector.clone(),
                nstar: c.nstar,
                cap_ratio,
                lambda,
                employment: c.employment,
                regime,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsidyRow<T> {
    pub key: String,
    /// Employment-weighted mean subsidy, as a fraction.
    pub lambda: T,
    pub employment: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsidyTable<T> {
    pub rows: Vec<SubsidyRow<T>>,
    pub overall: SubsidyRow<T>,
}

#[derive(Default)]
struct Acc<T> {
    weighted: CompensatedSum<T>,
    employment: CompensatedSum<T>,
}

impl<T: Real> Acc<T> {
    fn add(&mut self, r: &SubsidyResult<T>) {
        self.weighted.add(r.employment * r.lambda);
        self.employment.add(r.employment);
    }

    fn row(&self, key: String) -> Result<SubsidyRow<T>> {
        let employment = self.employment.value();
        if !(employment > T::zero()) {
            return Err(Error::Argument(format!("{key}: no employment to weight subsidies by")));
        }
        Ok(SubsidyRow {
            key,
            lambda: self.weighted.value() / employment,
            employment,
        })
    }
}

fn overall<T: Real>(results: &[SubsidyResult<T>]) -> Result<SubsidyRow<T>> {
    let mut acc = Acc::default();
    results.iter().for_each(|r| acc.add(r));
    acc.row("overall".to_string())
}

fn table<T: Real>(results: &[SubsidyResult<T>], key: impl Fn(&SubsidyResult<T>) -> Option<String>) -> Result<SubsidyTable<T>> {
    let mut groups: BTreeMap<String, Acc<T>> = BTreeMap::new();
    for r in results {
        if let Some(k) = key(r) {
            groups.entry(k).or_default().add(r);
        }
    }
    let mut rows = groups
        .into_iter()
        .map(|(k, acc)| acc.row(k))
        .collect::<Result<Vec<_>>>()?;
    // most affected first; ties by key for a stable order
    rows.sort_by(|a, b| {
        b.lambda
            .partial_cmp(&a.lambda)
            .expect("finite subsidies")
            .then_with(|| a.key.cmp(&b.key))
    });
    Ok(SubsidyTable {
        rows,
        overall: overall(results)?,
    })
}

/// Employment-weighted subsidy per sector, most affected first, plus the overall mean.
pub fn sector_table<T: Real>(results: &[SubsidyResult<T>]) -> Result<SubsidyTable<T>> {
    table(results, |r| Some(r.sector.clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationTable<T> {
    pub table: SubsidyTable<T>,
    /// ZCTAs in the grouping that have no results.
    pub unknown: Vec<String>,
}

/// Employment-weighted subsidy per ZCTA, or per named region when `grouping`
/// (zcta → region) is given. ZCTAs outside the grouping still count toward the overall mean.
pub fn location_table<T: Real>(
    results: &[SubsidyResult<T>],
    grouping: Option<&BTreeMap<String, String>>,
) -> Result<LocationTable<T>> {
    let Some(grouping) = grouping else {
        return Ok(LocationTable {
            table: table(results, |r| Some(r.zcta.clone()))?,
            unknown: Vec::new(),
        });
    };
    let present: BTreeSet<&str> = results.iter().map(|r| r.zcta.as_str()).collect();
    let unknown: Vec<String> = grouping
        .keys()
        .filter(|z| !present.contains(z.as_str()))
        .cloned()
        .collect();
    for z in &unknown {
        log::warn!("region grouping lists zcta {z} ({}) with no results", grouping[z]);
    }
    let table = table(results, |r| grouping.get(&r.zcta).cloned())?;
    Ok(LocationTable { table, unknown })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T> {
    pub density: T,
    pub distancing: T,
    /// `None` where telecommunication is cheaper than meeting in person.
    pub telecom: Option<T>,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSwitch<T> {
    pub density: T,
    pub from: Regime,
    pub to: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2<T> {
    pub points: Vec<CurvePoint<T>>,
    pub switches: Vec<RegimeSwitch<T>>,
    pub binding_density: T,
    pub equal_cost_density: Option<T>,
}

/// `points` densities spaced evenly in logs over `[min, max]`.
pub fn log_density_grid<T: Real>(min: T, max: T, points: usize) -> Result<Vec<T>> {
    if !(min > T::zero() && max > min && max.is_finite()) {
        return Err(Error::Argument(format!("density grid [{min}, {max}] must satisfy 0 < min < max")));
    }
    if points < 2 {
        return Err(Error::Argument("density grid needs at least two points".into()));
    }
    let (a, b) = (min.ln(), max.ln());
    let step = (b - a) / lit((points - 1) as f64);
    Ok((0..points)
        .map(|i| match i {
            0 => min,
            _ if i == points - 1 => max,
            _ => (a + step * lit(i as f64)).exp(),
        })
        .collect())
}

/// Cost ratios under distancing and telecommunication along `densities`, with the
/// densities where the preferred regime changes.
pub fn fig2_curves<T: Real>(
    params: &FirmParams<T>,
    eps: T,
    intervention: &Intervention<T>,
    densities: &[T],
) -> Result<Fig2<T>> {
    if densities.is_empty() {
        return Err(Error::Argument("empty density grid".into()));
    }
    if densities.iter().any(|d| !(*d > T::zero() && d.is_finite())) {
        return Err(Error::Argument("densities must be finite and positive".into()));
    }
    let cap = intervention.contact_cap();
    let points = densities
        .iter()
        .map(|&d| {
            let nstar = model::contacts_at_density(d, eps, params)?;
            let distancing = model::distancing_cost_ratio((cap / nstar).min(T::one()), params)?;
            let telecom = match intervention.telecom_cost() {
                Some(t) if t >= model::contact_cost_at_density(d, eps)? => {
                    Some(model::telecom_cost_ratio(t, d, eps, params)?)
                }
                _ => None,
            };
            let regime = model::preferred_regime(intervention, d, eps, params)?.regime;
            Ok(CurvePoint {
                density: d,
                distancing,
                telecom,
                regime,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let binding = model::binding_density(cap, eps, params)?;
    let equal = if params.chi() > T::zero() {
        model::equal_cost_density(intervention, eps, params)?
    } else {
        None
    };
    let mut candidates = vec![binding];
    if let Some(t) = intervention.telecom_cost() {
        candidates.push(model::telecom_admissible_density(t, eps)?);
    }
    candidates.extend(equal);
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    candidates.dedup();

    let (lo, hi) = densities
        .iter()
        .fold((densities[0], densities[0]), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let nudge: T = lit(1e-9);
    let mut switches = Vec::new();
    for c in candidates.into_iter().filter(|c| *c > lo && *c < hi) {
        let from = model::preferred_regime(intervention, c * (T::one() - nudge), eps, params)?.regime;
        let to = model::preferred_regime(intervention, c * (T::one() + nudge), eps, params)?.regime;
        if from != to {
            switches.push(RegimeSwitch { density: c, from, to });
        }
    }
    Ok(Fig2 {
        points,
        switches,
        binding_density: binding,
        equal_cost_density: equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(z: &str, sector: &str, l: f64, chi: f64, nstar: f64) -> ContactCell<f64> {
        ContactCell {
            zcta: z.into(),
            industry_code: sector.into(),
            sector: sector.into(),
            employment: l,
            density: 1.0,
            chi,
            nstar,
        }
    }

    fn calibrated(cap: f64, sectors: &[(&str, f64)]) -> CalibratedModel<f64> {
        CalibratedModel {
            eps: 0.02,
            contact_cap: cap,
            industry_params: sectors
                .iter()
                .map(|(s, chi)| (s.to_string(), FirmParams::from_chi(*chi).unwrap()))
                .collect(),
            target_contact_share: 0.5,
            target_elasticity: 0.04,
        }
    }

    #[test]
    fn subsidy_examples() {
        let m = calibrated(1.0, &[("a", 0.0), ("b", 0.5)]);
        let cells = [cell("z1", "a", 1.0, 0.0, 3.0), cell("z1", "b", 1.0, 0.5, 2.0), cell("z2", "b", 1.0, 0.5, 1.0)];
        let r = compute_subsidies(&m, &cells, None).unwrap();
        assert_eq!(r[0].lambda, 0.0);
        assert!((r[1].lambda - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r[1].cap_ratio, 0.5);
        assert_eq!(r[2].lambda, 0.0);
        assert_eq!(r[2].cap_ratio, 1.0);
        assert!(r.iter().all(|x| x.regime.is_none()));
    }

    #[test]
    fn tables_hand_arithmetic() {
        let m = calibrated(1.0, &[("a", 0.5), ("b", 0.5)]);
        // λ(0.5) = 2/3, λ(1) = 0
        let cells = [cell("z1", "a", 30.0, 0.5, 2.0), cell("z2", "a", 10.0, 0.5, 1.0), cell("z2", "b", 60.0, 0.5, 2.0)];
        let r = compute_subsidies(&m, &cells, None).unwrap();
        let s = sector_table(&r).unwrap();
        assert_eq!(s.rows[0].key, "b");
        assert!((s.rows[0].lambda - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.rows[1].lambda - 0.5).abs() < 1e-12);
        assert_eq!(s.rows[1].employment, 40.0);
        assert!((s.overall.lambda - 0.6).abs() < 1e-12);
        let l = location_table(&r, None).unwrap();
        assert!((l.table.rows[1].lambda - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(l.table.overall, s.overall);

        let grouping: BTreeMap<String, String> =
            [("z1", "east"), ("z2", "east"), ("z9", "west")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let g = location_table(&r, Some(&grouping)).unwrap();
        assert_eq!(g.unknown, vec!["z9".to_string()]);
        assert_eq!(g.table.rows.len(), 1);
        assert!((g.table.rows[0].lambda - 0.6).abs() < 1e-12);
    }

    #[test]
    fn uniform_lambda_is_grouping_invariant() {
        let m = calibrated(1.0, &[("a", 0.5), ("b", 0.5)]);
        let cells = [cell("z1", "a", 3.0, 0.5, 2.0), cell("z2", "b", 7.0, 0.5, 2.0)];
        let r = compute_subsidies(&m, &cells, None).unwrap();
        let l = location_table(&r, None).unwrap();
        assert!(l.table.rows.iter().all(|row| (row.lambda - 2.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn regimes_when_telecom_given() {
        let m = calibrated(2.0, &[("a", 0.5)]);
        let mut c = cell("z1", "a", 1.0, 0.5, 1.0);
        c.density = 42.0;
        c.nstar = model::contacts_at_density(42.0, 0.02, &FirmParams::from_chi(0.5).unwrap()).unwrap();
        let r = compute_subsidies(&m, &[c], Some(0.16)).unwrap();
        assert!(r[0].regime.is_some());
    }

    fn scenario() -> (FirmParams<f64>, f64, Intervention<f64>) {
        (FirmParams::from_chi(0.5).unwrap(), 0.5, Intervention::new(2.0, Some(0.16)).unwrap())
    }

    #[test]
    fn fig2_flat_below_binding() {
        let (p, eps, _) = scenario();
        let iv = Intervention::new(2.0, None).unwrap();
        let f = fig2_curves(&p, eps, &iv, &log_density_grid(0.1, 15.0, 50).unwrap()).unwrap();
        assert!(f.points.iter().all(|pt| pt.distancing == 1.0 && pt.regime == Regime::Unconstrained));
        assert!(f.switches.is_empty());
        assert_eq!(f.binding_density, 16.0);
    }

    #[test]
    fn fig2_switches_and_crossing() {
        let (p, eps, iv) = scenario();
        let f = fig2_curves(&p, eps, &iv, &log_density_grid(1.0, 1000.0, 200).unwrap()).unwrap();
        let seq: Vec<(Regime, Regime)> = f.switches.iter().map(|s| (s.from, s.to)).collect();
        assert_eq!(
            seq,
            vec![
                (Regime::Unconstrained, Regime::Distanced),
                (Regime::Distanced, Regime::Telecom),
                (Regime::Telecom, Regime::Distanced)
            ]
        );
        assert!((f.switches[0].density - 16.0).abs() < 1e-9);
        assert!((f.switches[1].density - 39.0625).abs() < 1e-9);

        // bisection on the ratio difference between the admissible density and the top of the grid
        let diff = |d: f64| {
            let nstar = model::contacts_at_density(d, eps, &p).unwrap();
            model::distancing_cost_ratio(2.0 / nstar, &p).unwrap() - model::telecom_cost_ratio(0.16, d, eps, &p).unwrap()
        };
        let (mut lo, mut hi) = (39.0625 * (1.0 + 1e-12), 1000.0);
        assert!(diff(lo) > 0.0 && diff(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = f.equal_cost_density.unwrap();
        assert!((crossing - lo).abs() < 1e-8, "{crossing} vs {lo}");
        assert_eq!(f.switches[2].density, crossing);

        let telecom: Vec<f64> = f.points.iter().filter_map(|p| p.telecom).collect();
        assert!(telecom.len() > 10);
        assert!(telecom.windows(2).all(|w| w[1] > w[0]));
        assert!(f.points.iter().all(|p| p.distancing >= 1.0));
    }

    #[test]
    fn grid_validation() {
        assert!(log_density_grid(0.0, 1.0, 10).is_err());
        assert!(log_density_grid(2.0, 1.0, 10).is_err());
        assert!(log_density_grid(1.0, 2.0, 1).is_err());
        let g = log_density_grid(1.0f64, 100.0, 3).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cells() -> impl Strategy<Value = Vec<ContactCell<f64>>> {
            prop::collection::vec((0..4usize, 0.1..50.0f64, 0.5..20.0f64, 0..5usize), 1..40).prop_map(|v| {
                v.into_iter()
                    .map(|(s, l, nstar, z)| {
                        let sector = ["s0", "s1", "s2", "s3"][s];
                        cell(&format!("z{z}"), sector, l, [0.0, 0.2, 0.5, 0.8][s], nstar)
                    })
                    .collect()
            })
        }

        fn model_with(cap: f64) -> CalibratedModel<f64> {
            calibrated(cap, &[("s0", 0.0), ("s1", 0.2), ("s2", 0.5), ("s3", 0.8)])
        }

        proptest! {
            #[test]
            fn weighted_means_within_cell_range(c in cells(), cap in 0.3..10.0f64) {
                let r = compute_subsidies(&model_with(cap), &c, None).unwrap();
                for t in [sector_table(&r).unwrap(), location_table(&r, None).unwrap().table] {
                    for row in t.rows.iter().chain([&t.overall]) {
                        let members: Vec<f64> = r.iter()
                            .filter(|x| row.key == "overall" || x.sector == row.key || x.zcta == row.key)
                            .map(|x| x.lambda)
                            .collect();
                        let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(row.lambda >= lo - 1e-12 && row.lambda <= hi + 1e-12);
                    }
                }
                for x in &r {
                    prop_assert!(x.lambda >= 0.0 && x.lambda < 1.0);
                    prop_assert_eq!(x.lambda == 0.0, x.cap_ratio == 1.0 || x.sector == "s0");
                }
            }

            #[test]
            fn raising_cap_never_raises_subsidies(c in cells(), a in 0.3..10.0f64, b in 0.3..10.0f64) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let r_lo = compute_subsidies(&model_with(lo), &c, None).unwrap();
                let r_hi = compute_subsidies(&model_with(hi), &c, None).unwrap();
                for (x, y) in r_lo.iter().zip(&r_hi) {
                    prop_assert!(y.lambda <= x.lambda);
                }
                let (s_lo, s_hi) = (sector_table(&r_lo).unwrap(), sector_table(&r_hi).unwrap());
                prop_assert!(s_hi.overall.lambda <= s_lo.overall.lambda + 1e-15);
                for row in &s_hi.rows {
                    let other = s_lo.rows.iter().find(|r| r.key == row.key).unwrap();
                    prop_assert!(row.lambda <= other.lambda + 1e-15);
                }
            }

            #[test]
            fn overall_means_agree(c in cells(), cap in 0.3..10.0f64) {
                let r = compute_subsidies(&model_with(cap), &c, None).unwrap();
                let s = sector_table(&r).unwrap().overall.lambda;
                let l = location_table(&r, None).unwrap().table.overall.lambda;
                prop_assert!((s - l).abs() <= 1e-12);
            }
        }
    }
}
