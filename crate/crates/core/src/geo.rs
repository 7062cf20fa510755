//! ZIP-level employment from establishment size bins, population density, and
//! employment-weighted regional exposure shares.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::industry::{normalize_naics, GroupShares, MixResolver};
use crate::scalar::{compensated_sum, lit, CompensatedSum, Real};

/// Establishment employment-size classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBin {
    E1To4,
    E5To9,
    E10To19,
    E20To49,
    E50To99,
    E100To249,
    E250To499,
    E500To999,
    E1000Plus,
}

impl SizeBin {
    pub const ALL: [SizeBin; 9] = [
        SizeBin::E1To4,
        SizeBin::E5To9,
        SizeBin::E10To19,
        SizeBin::E20To49,
        SizeBin::E50To99,
        SizeBin::E100To249,
        SizeBin::E250To499,
        SizeBin::E500To999,
        SizeBin::E1000Plus,
    ];

    /// Inclusive employee bounds; the open top class has no upper bound.
    pub fn bounds(&self) -> (u32, Option<u32>) {
        match self {
            SizeBin::E1To4 => (1, Some(4)),
            SizeBin::E5To9 => (5, Some(9)),
            SizeBin::E10To19 => (10, Some(19)),
            SizeBin::E20To49 => (20, Some(49)),
            SizeBin::E50To99 => (50, Some(99)),
            SizeBin::E100To249 => (100, Some(249)),
            SizeBin::E250To499 => (250, Some(499)),
            SizeBin::E500To999 => (500, Some(999)),
            SizeBin::E1000Plus => (1000, None),
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for SizeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bounds() {
            (lo, Some(hi)) => write!(f, "{lo}-{hi}"),
            (lo, None) => write!(f, "{lo}+"),
        }
    }
}

impl FromStr for SizeBin {
    type Err = Error;

    /// Accepts `1-4`, `1–4`, `n1_4`, `1000+`, `n1000`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(['–', '_'], "-");
        let t = t.strip_prefix('n').unwrap_or(&t);
        for bin in SizeBin::ALL {
            let matches = match bin.bounds() {
                (lo, Some(hi)) => t == format!("{lo}-{hi}"),
                (lo, None) => t == format!("{lo}+") || t == lo.to_string(),
            };
            if matches {
                return Ok(bin);
            }
        }
        Err(Error::ingestion("size_bin", None, format!("unknown size bin {s:?}")))
    }
}

/// Employment assigned to one establishment in each size class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMidpoints<T> {
    values: [T; 9],
}

impl<T: Real> Default for BinMidpoints<T> {
    fn default() -> Self {
        let v = [2.5, 7.0, 14.5, 34.5, 74.5, 174.5, 374.5, 749.5, 1500.0];
        Self { values: v.map(lit) }
    }
}

impl<T: Real> BinMidpoints<T> {
    pub fn get(&self, bin: SizeBin) -> T {
        self.values[bin.index()]
    }

    /// Same midpoints with a different size for the open top class.
    pub fn with_open_bin(mut self, size: T) -> Self {
        self.values[SizeBin::E1000Plus.index()] = size;
        self
    }

    pub fn open_bin(&self) -> T {
        self.get(SizeBin::E1000Plus)
    }
}

/// `Σ count × midpoint`.
pub fn estimate_cell_employment<T: Real>(counts: &[(SizeBin, u64)], midpoints: &BinMidpoints<T>) -> T {
    compensated_sum(counts.iter().map(|&(bin, n)| lit::<T>(n as f64) * midpoints.get(bin)))
}

/// National establishment counts and employment by NAICS code and size class.
#[derive(Debug, Clone, Default)]
pub struct NationalSizes<T> {
    by_code: BTreeMap<String, BTreeMap<SizeBin, (u64, T)>>,
}

impl<T: Real> NationalSizes<T> {
    pub fn new() -> Self {
        Self { by_code: BTreeMap::new() }
    }

    pub fn insert(&mut self, naics: &str, bin: SizeBin, establishments: u64, employment: T) -> Result<()> {
        if !(employment >= T::zero() && employment.is_finite()) {
            return Err(Error::ingestion(
                "national sizes",
                None,
                format!("{naics} {bin}: employment {employment} must be finite and >= 0"),
            ));
        }
        let slot = self
            .by_code
            .entry(normalize_naics(naics).to_string())
            .or_default()
            .entry(bin)
            .or_insert((0, T::zero()));
        slot.0 += establishments;
        slot.1 = slot.1 + employment;
        Ok(())
    }

    /// Mean plant size over `bins`, from the most detailed code (or ancestor) with
    /// establishments in those bins. Returns the matched code too.
    pub fn mean_size(&self, naics: &str, bins: &[SizeBin]) -> Option<(T, &str)> {
        let code = normalize_naics(naics);
        for len in (1..=code.len()).rev() {
            if !code.is_char_boundary(len) {
                continue;
            }
            let Some((key, dist)) = self.by_code.get_key_value(&code[..len]) else {
                continue;
            };
            let (estabs, emp) = bins
                .iter()
                .filter_map(|b| dist.get(b))
                .fold((0u64, CompensatedSum::new()), |(n, mut e), &(en, ee)| {
                    e.add(ee);
                    (n + en, e)
                });
            if estabs > 0 {
                return Some((emp.value() / lit(estabs as f64), key.as_str()));
            }
        }
        None
    }
}

/// One row of the establishment file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbpRecord {
    pub zcta: String,
    pub naics: String,
    /// Known size class; for suppressed rows `None` means any class the cell does not report.
    pub size_bin: Option<SizeBin>,
    pub establishments: u64,
    pub suppressed: bool,
}

/// Establishment counts of one ZIP × industry cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub reported: BTreeMap<SizeBin, u64>,
    pub suppressed: Vec<(Option<SizeBin>, u64)>,
}

impl CellCounts {
    pub fn reported_counts(&self) -> Vec<(SizeBin, u64)> {
        self.reported.iter().map(|(b, n)| (*b, *n)).collect()
    }

    fn suppressed_bins(&self, bin: Option<SizeBin>) -> Vec<SizeBin> {
        match bin {
            Some(b) => vec![b],
            None => {
                let missing: Vec<SizeBin> = SizeBin::ALL
                    .into_iter()
                    .filter(|b| !self.reported.contains_key(b))
                    .collect();
                if missing.is_empty() {
                    SizeBin::ALL.to_vec()
                } else {
                    missing
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEstimate<T> {
    pub employment: T,
    pub imputed_fraction: T,
}

/// Size for the open top class in `naics`: the national mean of that class, else `fallback`.
pub fn open_bin_size<T: Real>(naics: &str, national: &NationalSizes<T>, fallback: T) -> T {
    national
        .mean_size(naics, &[SizeBin::E1000Plus])
        .map(|(m, _)| m)
        .unwrap_or(fallback)
}

/// Employment of a cell, with suppressed establishments assigned the national mean
/// plant size of their (possible) size classes in the same NAICS industry.
///
/// `None` when a suppressed group has no national distribution at any ancestor code.
pub fn impute_suppressed<T: Real>(
    cell: &CellCounts,
    naics: &str,
    national: &NationalSizes<T>,
    midpoints: &BinMidpoints<T>,
) -> Option<CellEstimate<T>> {
    let midpoints = midpoints.with_open_bin(open_bin_size(naics, national, midpoints.open_bin()));
    let base = estimate_cell_employment(&cell.reported_counts(), &midpoints);
    let mut imputed = CompensatedSum::new();
    for &(bin, n) in &cell.suppressed {
        if n == 0 {
            continue;
        }
        let (mean, _) = national.mean_size(naics, &cell.suppressed_bins(bin))?;
        imputed.add(lit::<T>(n as f64) * mean);
    }
    let imputed = imputed.value();
    let total = base + imputed;
    let imputed_fraction = if total > T::zero() { imputed / total } else { T::zero() };
    Some(CellEstimate {
        employment: total,
        imputed_fraction,
    })
}

/// Estimated employment `l_ir` of one ZIP × industry cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell<T> {
    pub zcta: String,
    pub industry_code: String,
    pub employment: T,
    pub imputed_fraction: T,
}

#[derive(Debug, Clone, Default)]
pub struct CellReport<T> {
    /// Sorted by (zcta, industry_code).
    pub cells: Vec<RegionCell<T>>,
    /// Cells with suppressed plants and no national distribution to impute from.
    pub dropped: Vec<(String, String)>,
}

/// Groups establishment rows into cells and estimates their employment.
pub fn build_cells<T: Real>(
    records: &[CbpRecord],
    national: &NationalSizes<T>,
    midpoints: &BinMidpoints<T>,
) -> Result<CellReport<T>> {
    let mut grouped: BTreeMap<(String, String), CellCounts> = BTreeMap::new();
    for r in records {
        let key = (r.zcta.trim().to_string(), normalize_naics(&r.naics).to_string());
        let cell = grouped.entry(key).or_default();
        if r.suppressed {
            cell.suppressed.push((r.size_bin, r.establishments));
        } else {
            let bin = r.size_bin.ok_or_else(|| {
                Error::ingestion(
                    "cbp",
                    None,
                    format!("zcta {} naics {}: unsuppressed row without size bin", r.zcta, r.naics),
                )
            })?;
            *cell.reported.entry(bin).or_insert(0) += r.establishments;
        }
    }
    let estimated: Vec<((String, String), Option<CellEstimate<T>>)> = grouped
        .into_par_iter()
        .map(|((zcta, naics), counts)| {
            let est = impute_suppressed(&counts, &naics, national, midpoints);
            ((zcta, naics), est)
        })
        .collect();
    let mut report = CellReport {
        cells: Vec::with_capacity(estimated.len()),
        dropped: Vec::new(),
    };
    for ((zcta, naics), est) in estimated {
        match est {
            Some(e) => report.cells.push(RegionCell {
                zcta,
                industry_code: naics,
                employment: e.employment,
                imputed_fraction: e.imputed_fraction,
            }),
            None => {
                log::warn!("zcta {zcta} naics {naics}: no national size distribution for suppressed plants; cell dropped");
                report.dropped.push((zcta, naics));
            }
        }
    }
    Ok(report)
}

/// Drops cells whose NAICS code starts with an excluded code.
pub fn exclude_cells<T: Real>(cells: Vec<RegionCell<T>>, exclusions: &[String]) -> (Vec<RegionCell<T>>, Vec<RegionCell<T>>) {
    cells.into_iter().partition(|c| {
        let code = normalize_naics(&c.industry_code);
        !exclusions.iter().any(|e| {
            let e = normalize_naics(e);
            !e.is_empty() && code.starts_with(e)
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRecord<T> {
    pub zcta: String,
    pub population: T,
    pub land_area: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensitySource {
    #[default]
    Population,
    Employment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionDensity<T> {
    pub zcta: String,
    pub population: T,
    pub land_area: T,
    pub raw_density: T,
    /// Raw density over its employment-weighted national mean.
    pub normalized_density: T,
}

#[derive(Debug, Clone, Default)]
pub struct DensityReport<T> {
    pub densities: BTreeMap<String, RegionDensity<T>>,
    /// Regions without positive land area or density.
    pub dropped: Vec<String>,
}

/// Total employment per ZCTA, in key order.
pub fn region_employment<T: Real>(cells: &[RegionCell<T>]) -> BTreeMap<&str, T> {
    let mut acc: BTreeMap<&str, CompensatedSum<T>> = BTreeMap::new();
    for c in cells {
        acc.entry(c.zcta.as_str()).or_default().add(c.employment);
    }
    acc.into_iter().map(|(k, v)| (k, v.value())).collect()
}

/// Normalizes densities so their employment-weighted mean over all cells is one.
pub fn normalize_density<T: Real>(
    records: &[DensityRecord<T>],
    cells: &[RegionCell<T>],
    source: DensitySource,
) -> Result<DensityReport<T>> {
    let employment = region_employment(cells);
    let mut raw: BTreeMap<String, (T, T, T)> = BTreeMap::new();
    let mut dropped = Vec::new();
    for r in records {
        let zcta = r.zcta.trim().to_string();
        if raw.contains_key(&zcta) || dropped.contains(&zcta) {
            return Err(Error::ingestion("density", None, format!("duplicate zcta {zcta}")));
        }
        let numerator = match source {
            DensitySource::Population => r.population,
            DensitySource::Employment => employment.get(zcta.as_str()).copied().unwrap_or_else(T::zero),
        };
        if !(r.land_area > T::zero()) || !(numerator > T::zero()) || !numerator.is_finite() {
            log::warn!("zcta {zcta}: land area {} / size {numerator} gives no positive density; dropped", r.land_area);
            dropped.push(zcta);
            continue;
        }
        raw.insert(zcta, (r.population, r.land_area, numerator / r.land_area));
    }
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (zcta, (_, _, d)) in &raw {
        if let Some(&e) = employment.get(zcta.as_str()) {
            num.add(e * *d);
            den.add(e);
        }
    }
    let den = den.value();
    if !(den > T::zero()) {
        return Err(Error::Argument(
            "no employment in regions with density; cannot normalize".into(),
        ));
    }
    let mean = num.value() / den;
    let densities = raw
        .into_iter()
        .map(|(zcta, (population, land_area, raw_density))| {
            let d = RegionDensity {
                zcta: zcta.clone(),
                population,
                land_area,
                raw_density,
                normalized_density: raw_density / mean,
            };
            (zcta, d)
        })
        .collect();
    Ok(DensityReport { densities, dropped })
}

/// Employment-weighted exposure shares of one ZCTA.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationExposure<T> {
    pub zcta: String,
    pub density: Option<T>,
    pub shares: GroupShares<T>,
    pub employment: T,
}

#[derive(Debug, Clone, Default)]
pub struct ExposureReport<T> {
    pub regions: Vec<LocationExposure<T>>,
    /// NAICS codes with no industry mix, and their employment.
    pub unresolved: BTreeMap<String, T>,
}

/// `Σ_i l_ir χ_ig / Σ_i l_ir` per ZCTA. Regions without resolvable employment are omitted.
pub fn regional_exposure<T: Real>(
    cells: &[RegionCell<T>],
    resolver: &MixResolver<'_, T>,
    densities: Option<&BTreeMap<String, RegionDensity<T>>>,
) -> ExposureReport<T> {
    let mut sorted: Vec<&RegionCell<T>> = cells.iter().collect();
    sorted.sort_by(|a, b| (&a.zcta, &a.industry_code).cmp(&(&b.zcta, &b.industry_code)));
    let regions: Vec<&[&RegionCell<T>]> = sorted.chunk_by(|a, b| a.zcta == b.zcta).collect();

    type RegionResult<T> = (Option<LocationExposure<T>>, Vec<(String, T)>);
    let per_region: Vec<RegionResult<T>> = regions
        .par_iter()
        .map(|region| {
            let zcta = &region[0].zcta;
            let mut unresolved = Vec::new();
            let mut total = CompensatedSum::new();
            let mut sums: [CompensatedSum<T>; 4] = Default::default();
            for cell in region.iter() {
                match resolver.resolve(&cell.industry_code) {
                    Some(r) => {
                        total.add(cell.employment);
                        for (acc, g) in sums.iter_mut().zip(crate::industry::Group::ALL) {
                            acc.add(cell.employment * r.mix.chi.get(g));
                        }
                    }
                    None => unresolved.push((cell.industry_code.clone(), cell.employment)),
                }
            }
            let total = total.value();
            let exposure = (total > T::zero()).then(|| LocationExposure {
                zcta: zcta.clone(),
                density: densities.and_then(|d| d.get(zcta)).map(|d| d.normalized_density),
                shares: GroupShares {
                    teamwork: sums[0].value() / total,
                    customer: sums[1].value() / total,
                    communication: sums[2].value() / total,
                    presence: sums[3].value() / total,
                },
                employment: total,
            });
            (exposure, unresolved)
        })
        .collect();

    let mut report = ExposureReport::default();
    let mut unresolved: BTreeMap<String, CompensatedSum<T>> = BTreeMap::new();
    for (exposure, missing) in per_region {
        report.regions.extend(exposure);
        for (code, e) in missing {
            unresolved.entry(code).or_default().add(e);
        }
    }
    report.unresolved = unresolved.into_iter().map(|(k, v)| (k, v.value())).collect();
    for (code, e) in &report.unresolved {
        log::warn!("naics {code} ({e} employed) resolves to no industry; left out");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::industry::{Concordance, IndustryMix};

    #[test]
    fn size_bin_labels() {
        assert_eq!("1-4".parse::<SizeBin>().unwrap(), SizeBin::E1To4);
        assert_eq!("1–4".parse::<SizeBin>().unwrap(), SizeBin::E1To4);
        assert_eq!("n5_9".parse::<SizeBin>().unwrap(), SizeBin::E5To9);
        assert_eq!("n1000".parse::<SizeBin>().unwrap(), SizeBin::E1000Plus);
        assert_eq!("1000+".parse::<SizeBin>().unwrap(), SizeBin::E1000Plus);
        assert!(matches!("3-7".parse::<SizeBin>(), Err(Error::Ingestion { .. })));
        for b in SizeBin::ALL {
            assert_eq!(b.to_string().parse::<SizeBin>().unwrap(), b);
        }
    }

    #[test]
    fn cell_employment_examples() {
        let mp = BinMidpoints::<f64>::default();
        assert_eq!(estimate_cell_employment(&[(SizeBin::E1To4, 1)], &mp), 2.5);
        assert_eq!(estimate_cell_employment(&[], &mp), 0.0);
        assert_eq!(estimate_cell_employment(&[(SizeBin::E1To4, 2), (SizeBin::E5To9, 1)], &mp), 12.0);
    }

    fn national() -> NationalSizes<f64> {
        let mut n = NationalSizes::new();
        // suppressed classes of a cell reporting only 1-4: mean (200 + 600) / 20 = 40
        n.insert("72", SizeBin::E1To4, 100, 250.0).unwrap();
        n.insert("72", SizeBin::E10To19, 10, 200.0).unwrap();
        n.insert("72", SizeBin::E50To99, 10, 600.0).unwrap();
        n.insert("44", SizeBin::E1000Plus, 2, 2400.0).unwrap();
        n
    }

    #[test]
    fn imputation_examples() {
        let mp = BinMidpoints::default();
        let plain = CellCounts {
            reported: [(SizeBin::E1To4, 2)].into_iter().collect(),
            suppressed: vec![],
        };
        let e = impute_suppressed(&plain, "722511", &national(), &mp).unwrap();
        assert_eq!(e.employment, 5.0);
        assert_eq!(e.imputed_fraction, 0.0);

        let one = CellCounts {
            reported: [(SizeBin::E1To4, 2)].into_iter().collect(),
            suppressed: vec![(None, 1)],
        };
        let e = impute_suppressed(&one, "722511", &national(), &mp).unwrap();
        assert_eq!(e.employment, 45.0);
        assert_eq!(e.imputed_fraction, 40.0 / 45.0);

        // explicit class
        let known = CellCounts {
            reported: BTreeMap::new(),
            suppressed: vec![(Some(SizeBin::E50To99), 2)],
        };
        assert_eq!(impute_suppressed(&known, "72", &national(), &mp).unwrap().employment, 120.0);

        // nothing to impute from
        assert!(impute_suppressed(&one, "236220", &national(), &mp).is_none());
        // but unsuppressed cells never need the national file
        assert!(impute_suppressed(&plain, "236220", &national(), &mp).is_some());
    }

    #[test]
    fn open_bin_uses_national_mean_then_default() {
        let mp = BinMidpoints::default();
        let big = CellCounts {
            reported: [(SizeBin::E1000Plus, 1)].into_iter().collect(),
            suppressed: vec![],
        };
        assert_eq!(impute_suppressed(&big, "445110", &national(), &mp).unwrap().employment, 1200.0);
        assert_eq!(impute_suppressed(&big, "236220", &national(), &mp).unwrap().employment, 1500.0);
    }

    fn cell(z: &str, naics: &str, e: f64) -> RegionCell<f64> {
        RegionCell {
            zcta: z.into(),
            industry_code: naics.into(),
            employment: e,
            imputed_fraction: 0.0,
        }
    }

    #[test]
    fn build_cells_groups_and_drops() {
        let recs = vec![
            CbpRecord {
                zcta: "00002".into(),
                naics: "722511".into(),
                size_bin: Some(SizeBin::E1To4),
                establishments: 2,
                suppressed: false,
            },
            CbpRecord {
                zcta: "00002".into(),
                naics: "722511".into(),
                size_bin: None,
                establishments: 1,
                suppressed: true,
            },
            CbpRecord {
                zcta: "00001".into(),
                naics: "236220".into(),
                size_bin: None,
                establishments: 1,
                suppressed: true,
            },
        ];
        let r = build_cells(&recs, &national(), &BinMidpoints::default()).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].employment, 45.0);
        assert_eq!(r.dropped, vec![("00001".to_string(), "236220".to_string())]);
    }

    #[test]
    fn exclusion_by_prefix() {
        let cells = vec![cell("1", "622110", 1.0), cell("1", "445110", 2.0)];
        let (kept, gone) = exclude_cells(cells, &["622".into()]);
        assert_eq!(kept.len(), 1);
        assert_eq!(gone[0].industry_code, "622110");
    }

    fn rec(z: &str, pop: f64, area: f64) -> DensityRecord<f64> {
        DensityRecord {
            zcta: z.into(),
            population: pop,
            land_area: area,
        }
    }

    #[test]
    fn density_examples() {
        let r = normalize_density(&[rec("a", 100.0, 4.0)], &[cell("a", "44", 3.0)], DensitySource::Population).unwrap();
        assert_eq!(r.densities["a"].normalized_density, 1.0);

        let cells = [cell("a", "44", 5.0), cell("b", "44", 5.0)];
        let r = normalize_density(&[rec("a", 10.0, 1.0), rec("b", 30.0, 1.0)], &cells, DensitySource::Population).unwrap();
        assert_eq!(r.densities["a"].normalized_density, 0.5);
        assert_eq!(r.densities["b"].normalized_density, 1.5);
    }

    #[test]
    fn density_drops_and_errors() {
        let cells = [cell("a", "44", 5.0), cell("b", "44", 5.0)];
        let r = normalize_density(&[rec("a", 10.0, 1.0), rec("b", 30.0, 0.0)], &cells, DensitySource::Population).unwrap();
        assert_eq!(r.dropped, ["b"]);
        assert_eq!(r.densities["a"].normalized_density, 1.0);
        assert!(normalize_density(&[rec("a", 1.0, 1.0), rec("a", 1.0, 1.0)], &cells, DensitySource::Population).is_err());
        assert!(normalize_density(&[rec("z", 1.0, 1.0)], &cells, DensitySource::Population).is_err());
    }

    #[test]
    fn employment_density_source() {
        let cells = [cell("a", "44", 10.0), cell("b", "44", 30.0)];
        let r = normalize_density(&[rec("a", 1.0, 1.0), rec("b", 1.0, 1.0)], &cells, DensitySource::Employment).unwrap();
        // raw 10 and 30, weighted mean (100 + 900) / 40 = 25
        assert_eq!(r.densities["a"].normalized_density, 0.4);
        assert_eq!(r.densities["b"].normalized_density, 1.2);
    }

    fn mixes() -> Vec<IndustryMix<f64>> {
        let m = |code: &str, v: f64| IndustryMix {
            industry_code: code.into(),
            shares: BTreeMap::new(),
            chi: GroupShares {
                teamwork: v,
                customer: v,
                communication: v,
                presence: v,
            },
            employment: 1.0,
        };
        vec![m("44", 0.2), m("72", 0.6)]
    }

    #[test]
    fn exposure_examples() {
        let mixes = mixes();
        let conc = Concordance::new();
        let resolver = MixResolver::new(&mixes, &conc);
        let one = regional_exposure(&[cell("a", "445110", 7.0)], &resolver, None);
        assert_eq!(one.regions[0].shares.customer, 0.2);
        let two = regional_exposure(&[cell("a", "445110", 5.0), cell("a", "722511", 5.0)], &resolver, None);
        assert!((two.regions[0].shares.communication - 0.4).abs() < 1e-15);
        let none = regional_exposure(&[cell("a", "236220", 5.0)], &resolver, None);
        assert!(none.regions.is_empty());
        assert_eq!(none.unresolved["236220"], 5.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cell_employment_is_linear(a in prop::collection::vec(0u64..50, 9), b in prop::collection::vec(0u64..50, 9), k in 0u64..5) {
                let mp = BinMidpoints::<f64>::default();
                let counts = |v: &[u64]| SizeBin::ALL.iter().zip(v).map(|(b, n)| (*b, *n)).collect::<Vec<_>>();
                let sum: Vec<u64> = a.iter().zip(&b).map(|(x, y)| k * x + y).collect();
                let lhs = estimate_cell_employment(&counts(&sum), &mp);
                let rhs = k as f64 * estimate_cell_employment(&counts(&a), &mp) + estimate_cell_employment(&counts(&b), &mp);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
            }

            #[test]
            fn imputation_never_reduces(reported in prop::collection::vec(0u64..20, 9), sup in 0u64..5) {
                let mp = BinMidpoints::default();
                let base = CellCounts {
                    reported: SizeBin::ALL.iter().zip(&reported).filter(|(_, n)| **n > 0).map(|(b, n)| (*b, *n)).collect(),
                    suppressed: vec![],
                };
                let with = CellCounts { suppressed: vec![(None, sup)], ..base.clone() };
                let mut nat = national();
                for b in SizeBin::ALL { nat.insert("72", b, 1, 10.0).unwrap(); }
                let e0 = impute_suppressed(&base, "72", &nat, &mp).unwrap();
                let e1 = impute_suppressed(&with, "72", &nat, &mp).unwrap();
                prop_assert!(e1.employment >= e0.employment);
                prop_assert_eq!(e0.imputed_fraction, 0.0);
                prop_assert!((0.0..=1.0).contains(&e1.imputed_fraction));
            }

            #[test]
            fn splitting_cells_preserves_exposure(e1 in 0.1..100.0f64, e2 in 0.1..100.0f64, frac in 0.01..0.99f64) {
                let mixes = mixes();
                let conc = Concordance::new();
                let resolver = MixResolver::new(&mixes, &conc);
                let whole = regional_exposure(&[cell("a", "44", e1), cell("a", "72", e2)], &resolver, None);
                let split = regional_exposure(
                    &[cell("a", "44", e1 * frac), cell("a", "44", e1 * (1.0 - frac)), cell("a", "72", e2)],
                    &resolver, None);
                let (w, s) = (&whole.regions[0], &split.regions[0]);
                prop_assert!((w.shares.communication - s.shares.communication).abs() < 1e-12);
                prop_assert!((w.employment - s.employment).abs() < 1e-9);
            }

            #[test]
            fn normalized_density_has_unit_weighted_mean(v in prop::collection::vec((0.1..1e4f64, 0.1..100.0f64, 0.0..1e3f64), 1..20)) {
                let recs: Vec<_> = v.iter().enumerate().map(|(i, (p, a, _))| rec(&i.to_string(), *p, *a)).collect();
                let mut cells: Vec<_> = v.iter().enumerate().map(|(i, (_, _, e))| cell(&i.to_string(), "44", *e)).collect();
                cells.push(cell("0", "72", 1.0));
                let r = normalize_density(&recs, &cells, DensitySource::Population).unwrap();
                let mean = crate::scalar::weighted_mean(cells.iter().map(|c| (r.densities[&c.zcta].normalized_density, c.employment))).unwrap();
                prop_assert!((mean - 1.0).abs() < 1e-9);
            }
        }
    }
}
