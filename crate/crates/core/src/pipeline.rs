//! End-to-end stages from raw inputs to subsidy tables.

use std::collections::BTreeMap;

use crate::calibrate::{self, Calibration, JoinReport, Targets};
use crate::counterfactual::{self, LocationTable, SubsidyResult, SubsidyTable};
use crate::error::{Error, Result};
use crate::geo::{self, BinMidpoints, CbpRecord, DensityRecord, DensityReport, DensitySource, ExposureReport, NationalSizes, RegionCell};
use crate::industry::{self, Concordance, ExclusionReport, Group, GroupShares, IndustryMix, MatrixRow, MixReport, MixResolver};
use crate::occupation::{self, Classification, MissingContext, OccupationProfile, Thresholds};
use crate::scalar::{CompensatedSum, Real};

/// Hospitals (622) and ambulatory care such as clinics (621).
pub const DEFAULT_EXCLUSIONS: [&str; 2] = ["621", "622"];

pub fn default_exclusions() -> Vec<String> {
    DEFAULT_EXCLUSIONS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone)]
pub struct IndexStage<T> {
    pub classification: Classification,
    pub mixes: MixReport<T>,
    /// Matrix employment in flagged occupations, per group.
    pub group_employment: GroupShares<T>,
}

pub fn index_stage<T: Real>(
    profiles: &[OccupationProfile<T>],
    matrix: &[MatrixRow<T>],
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<IndexStage<T>> {
    let classification = occupation::classify_all(profiles, thresholds, missing)?;
    let mixes = industry::build_mix(matrix, &classification.flags)?;
    let group_employment = GroupShares::from_fn(|g| {
        matrix
            .iter()
            .filter(|r| classification.flags.get(&r.soc_code).is_some_and(|f| g.flagged(f)))
            .map(|r| r.employment)
            .collect::<CompensatedSum<T>>()
            .value()
    });
    Ok(IndexStage {
        classification,
        mixes,
        group_employment,
    })
}

#[derive(Debug, Clone, Default)]
pub struct GeoInputs<T> {
    pub cbp: Vec<CbpRecord>,
    pub national: NationalSizes<T>,
    pub density: Vec<DensityRecord<T>>,
    pub concordance: Concordance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoSettings<T> {
    pub midpoints: BinMidpoints<T>,
    pub density_source: DensitySource,
}

impl<T: Real> Default for GeoSettings<T> {
    fn default() -> Self {
        Self {
            midpoints: BinMidpoints::default(),
            density_source: DensitySource::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeoStage<T> {
    /// All estimated cells, including excluded sectors.
    pub cells: Vec<RegionCell<T>>,
    pub dropped_cells: Vec<(String, String)>,
    pub densities: DensityReport<T>,
    /// Location exposure over all sectors.
    pub exposure: ExposureReport<T>,
}

/// Cell employment, normalized density and exposure by location.
///
/// Density and the location index cover every sector; exclusions only apply to the subsidy calculation.
pub fn geo_stage<T: Real>(mixes: &[IndustryMix<T>], inputs: &GeoInputs<T>, settings: &GeoSettings<T>) -> Result<GeoStage<T>> {
    let report = geo::build_cells(&inputs.cbp, &inputs.national, &settings.midpoints)?;
    let densities = geo::normalize_density(&inputs.density, &report.cells, settings.density_source)?;
    let resolver = MixResolver::new(mixes, &inputs.concordance);
    let exposure = geo::regional_exposure(&report.cells, &resolver, Some(&densities.densities));
    Ok(GeoStage {
        cells: report.cells,
        dropped_cells: report.dropped,
        densities,
        exposure,
    })
}

#[derive(Debug, Clone)]
pub struct CalibrationStage<T> {
    pub kept_mixes: Vec<IndustryMix<T>>,
    pub sector_exclusions: ExclusionReport,
    pub excluded_cells: Vec<RegionCell<T>>,
    pub join: JoinReport<T>,
    pub calibration: Calibration<T>,
}

pub fn calibration_stage<T: Real>(
    mixes: &[IndustryMix<T>],
    geo: &GeoStage<T>,
    concordance: &Concordance,
    exclusions: &[String],
    targets: &Targets<T>,
    fixed_eps: Option<T>,
) -> Result<CalibrationStage<T>> {
    let (kept_mixes, sector_exclusions) = industry::exclude_sectors(mixes.to_vec(), exclusions);
    let (kept_cells, excluded_cells) = geo::exclude_cells(geo.cells.clone(), exclusions);
    let resolver = MixResolver::new(&kept_mixes, concordance);
    let join = calibrate::join_cells(&kept_cells, &resolver, &geo.densities.densities);
    if join.cells.is_empty() {
        return Err(Error::Calibration("no cells with both an industry mix and a density".into()));
    }
    for (z, n) in &join.unresolved {
        log::warn!("zcta {z} naics {n}: no industry mix; cell skipped");
    }
    let calibration = calibrate::calibrate(&join.cells, targets, fixed_eps)?;
    Ok(CalibrationStage {
        kept_mixes,
        sector_exclusions,
        excluded_cells,
        join,
        calibration,
    })
}

#[derive(Debug, Clone)]
pub struct SubsidyStage<T> {
    pub results: Vec<SubsidyResult<T>>,
    pub sectors: SubsidyTable<T>,
    pub locations: LocationTable<T>,
}

pub fn subsidy_stage<T: Real>(calibration: &Calibration<T>, region_groups: Option<&BTreeMap<String, String>>) -> Result<SubsidyStage<T>> {
    let results = counterfactual::compute_subsidies(&calibration.model, &calibration.contacts, None)?;
    let sectors = counterfactual::sector_table(&results)?;
    let locations = counterfactual::location_table(&results, region_groups)?;
    Ok(SubsidyStage {
        results,
        sectors,
        locations,
    })
}

/// Group shares of the matrix employment, e.g. the communication-flagged workforce.
pub fn group_total<T: Real>(stage: &IndexStage<T>, group: Group) -> T {
    stage.group_employment.get(group)
}
