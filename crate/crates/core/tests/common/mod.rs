#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use distancing::calibrate::Targets;
use distancing::io::{self, Table};
use distancing::occupation::{MissingContext, Thresholds};
use distancing::pipeline::{self, CalibrationStage, GeoInputs, GeoSettings, GeoStage, IndexStage, SubsidyStage};
use distancing::Result;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

pub struct Run {
    pub index: IndexStage<f64>,
    pub geo: GeoStage<f64>,
    pub calibration: CalibrationStage<f64>,
    pub subsidy: SubsidyStage<f64>,
    pub names: BTreeMap<String, String>,
}

pub fn table(dir: &Path, name: &str) -> Result<Table> {
    Table::open(&dir.join(name))
}

/// Runs every stage on the standard file layout of `dir`.
pub fn run_dir(dir: &Path, fixed_eps: Option<f64>) -> Result<Run> {
    let profiles = io::read_occupations::<f64>(&table(dir, "occupations.csv")?)?;
    let matrix = io::read_matrix::<f64>(&table(dir, "matrix.csv")?)?;
    let index = pipeline::index_stage(&profiles, &matrix, &Thresholds::default(), MissingContext::Error)?;
    let concordance = match dir.join("concordance.csv").exists() {
        true => io::read_concordance(&table(dir, "concordance.csv")?)?,
        false => Default::default(),
    };
    let inputs = GeoInputs {
        cbp: io::read_cbp(&table(dir, "cbp.csv")?)?,
        national: io::read_national_sizes(&table(dir, "national_sizes.csv")?)?,
        density: io::read_density(&table(dir, "density.csv")?)?,
        concordance,
    };
    let geo = pipeline::geo_stage(&index.mixes.mixes, &inputs, &GeoSettings::default())?;
    let calibration = pipeline::calibration_stage(
        &index.mixes.mixes,
        &geo,
        &inputs.concordance,
        &pipeline::default_exclusions(),
        &Targets::default(),
        fixed_eps,
    )?;
    let regions = io::read_region_groups(&table(dir, "regions.csv")?)?;
    let subsidy = pipeline::subsidy_stage(&calibration.calibration, Some(&regions))?;
    let names = io::read_industry_names(&table(dir, "industry_names.csv")?)?;
    Ok(Run {
        index,
        geo,
        calibration,
        subsidy,
        names,
    })
}

/// Every output file of a run, rendered to bytes.
pub fn render(run: &Run) -> Vec<Vec<u8>> {
    let comment = Some("fixture");
    let mut out = vec![Vec::new(); 7];
    io::write_occupation_flags(&mut out[0], comment, &run.index.classification).unwrap();
    io::write_industry_index(&mut out[1], comment, &run.index.mixes.mixes, &run.names).unwrap();
    io::write_location_index(&mut out[2], comment, &run.geo.exposure.regions).unwrap();
    io::write_calibration(&mut out[3], comment, &run.calibration.calibration.report).unwrap();
    io::write_sector_subsidy(&mut out[4], comment, &run.subsidy.sectors, &run.names).unwrap();
    io::write_location_subsidy(&mut out[5], comment, &run.subsidy.locations.table).unwrap();
    let zcta_table = distancing::counterfactual::location_table(&run.subsidy.results, None).unwrap();
    io::write_location_subsidy(&mut out[6], comment, &zcta_table.table).unwrap();
    out
}

pub fn close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol * expected.abs().max(1.0)
}
