use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use distancing::calibrate::Targets;
use distancing::counterfactual::{self, Fig2};
use distancing::geo::{BinMidpoints, DensitySource};
use distancing::industry::Group;
use distancing::io::{self, Table};
use distancing::lowess;
use distancing::model::{FirmParams, Intervention};
use distancing::occupation::{MissingContext, Thresholds};
use distancing::pipeline::{self, CalibrationStage, GeoInputs, GeoSettings, GeoStage, IndexStage};
use distancing::scalar::CompensatedSum;

use crate::config::{usage, DensitySourceConfig, Loaded, MissingContextPolicy, RunConfig};
use crate::{Fig2Args, LowessArgs, TargetArgs};

pub struct Context {
    loaded: Loaded,
}

fn absolute(p: &Path) -> anyhow::Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

impl Context {
    pub fn new(config: Option<&Path>, out: Option<&Path>, lenient: bool) -> anyhow::Result<Self> {
        let mut loaded = Loaded::read(config)?;
        if let Some(out) = out {
            loaded.config.output_dir = Some(absolute(out)?);
        }
        if lenient {
            loaded.config.thresholds.missing_context = MissingContextPolicy::FailClosed;
        }
        let ctx = Self { loaded };
        ctx.check()?;
        Ok(ctx)
    }

    fn check(&self) -> anyhow::Result<()> {
        self.loaded.validate()?;
        let i = &self.loaded.config.inputs;
        for (name, p) in [
            ("occupations", &i.occupations),
            ("matrix", &i.matrix),
            ("cbp", &i.cbp),
            ("density", &i.density),
            ("national_sizes", &i.national_sizes),
            ("concordance", &i.concordance),
            ("industry_names", &i.industry_names),
            ("exclusions", &i.exclusions),
            ("region_groups", &i.region_groups),
        ] {
            self.loaded.optional_input(name, p)?;
        }
        Ok(())
    }

    /// Same context with target flags folded into the configuration.
    fn with_targets(&self, t: &TargetArgs) -> anyhow::Result<Self> {
        let mut loaded = self.loaded.clone();
        let c = &mut loaded.config;
        if let Some(v) = t.fixed_eps {
            c.targets.fixed_eps = Some(v);
        }
        if let Some(v) = t.target_share {
            c.targets.contact_share = v;
        }
        if let Some(v) = t.target_elasticity {
            c.targets.elasticity = v;
        }
        if let Some(p) = &t.exclusions {
            c.inputs.exclusions = Some(absolute(p)?);
        }
        let ctx = Self { loaded };
        ctx.check()?;
        Ok(ctx)
    }

    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn provenance(&self) -> anyhow::Result<String> {
        Ok(format!("distancing {} config={}", env!("CARGO_PKG_VERSION"), self.loaded.hash()?))
    }

    fn table(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<Table> {
        let path = self.loaded.input(name, value)?;
        Ok(Table::open(&path)?)
    }

    fn optional_table(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<Option<Table>> {
        match self.loaded.optional_input(name, value)? {
            Some(path) => Ok(Some(Table::open(&path)?)),
            None => Ok(None),
        }
    }

    fn has_geo(&self) -> bool {
        let i = &self.config().inputs;
        i.cbp.is_some() && i.density.is_some() && i.national_sizes.is_some()
    }

    fn out_dir(&self) -> anyhow::Result<PathBuf> {
        let dir = self.loaded.output_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn names(&self) -> anyhow::Result<BTreeMap<String, String>> {
        Ok(match self.optional_table("industry_names", &self.config().inputs.industry_names)? {
            Some(t) => io::read_industry_names(&t)?,
            None => BTreeMap::new(),
        })
    }

    fn index_stage(&self) -> anyhow::Result<IndexStage<f64>> {
        let c = self.config();
        let profiles = io::read_occupations::<f64>(&self.table("occupations", &c.inputs.occupations)?)?;
        let matrix = io::read_matrix::<f64>(&self.table("matrix", &c.inputs.matrix)?)?;
        let thresholds = Thresholds {
            cutoff: c.thresholds.cutoff,
            frequent_level: c.thresholds.frequent_level,
            proximity_level: c.thresholds.proximity_level,
        };
        let missing = match c.thresholds.missing_context {
            MissingContextPolicy::Error => MissingContext::Error,
            MissingContextPolicy::FailClosed => MissingContext::FailClosed,
        };
        Ok(pipeline::index_stage(&profiles, &matrix, &thresholds, missing)?)
    }

    fn geo_inputs(&self) -> anyhow::Result<GeoInputs<f64>> {
        let i = &self.config().inputs;
        Ok(GeoInputs {
            cbp: io::read_cbp(&self.table("cbp", &i.cbp)?)?,
            national: io::read_national_sizes(&self.table("national_sizes", &i.national_sizes)?)?,
            density: io::read_density(&self.table("density", &i.density)?)?,
            concordance: match self.optional_table("concordance", &i.concordance)? {
                Some(t) => io::read_concordance(&t)?,
                None => Default::default(),
            },
        })
    }

    fn geo_stage(&self, index: &IndexStage<f64>, inputs: &GeoInputs<f64>) -> anyhow::Result<GeoStage<f64>> {
        let g = &self.config().geo;
        let settings = GeoSettings {
            midpoints: BinMidpoints::default().with_open_bin(g.open_bin_size),
            density_source: match g.density_source {
                DensitySourceConfig::Population => DensitySource::Population,
                DensitySourceConfig::Employment => DensitySource::Employment,
            },
        };
        Ok(pipeline::geo_stage(&index.mixes.mixes, inputs, &settings)?)
    }

    fn calibration(&self) -> anyhow::Result<CalibrationStage<f64>> {
        let c = self.config();
        let index = self.index_stage()?;
        let inputs = self.geo_inputs()?;
        let geo = self.geo_stage(&index, &inputs)?;
        let exclusions = match self.optional_table("exclusions", &c.inputs.exclusions)? {
            Some(t) => io::read_exclusions(&t)?,
            None => pipeline::default_exclusions(),
        };
        let targets = Targets {
            contact_share: c.targets.contact_share,
            elasticity: c.targets.elasticity,
        };
        Ok(pipeline::calibration_stage(
            &index.mixes.mixes,
            &geo,
            &inputs.concordance,
            &exclusions,
            &targets,
            c.targets.fixed_eps,
        )?)
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> distancing::Result<()>) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn index(ctx: &Context) -> anyhow::Result<()> {
    let comment = ctx.provenance()?;
    let c = Some(comment.as_str());
    let dir = ctx.out_dir()?;
    let index = ctx.index_stage()?;
    let names = ctx.names()?;
    write_file(&dir.join("occupation-flags.csv"), |w| io::write_occupation_flags(w, c, &index.classification))?;
    write_file(&dir.join("industry-index.csv"), |w| io::write_industry_index(w, c, &index.mixes.mixes, &names))?;
    if ctx.has_geo() {
        let geo = ctx.geo_stage(&index, &ctx.geo_inputs()?)?;
        write_file(&dir.join("location-index.csv"), |w| io::write_location_index(w, c, &geo.exposure.regions))?;
    }
    let counts = &index.classification.counts;
    println!(
        "occupations {}: teamwork {}, customer {}, communication {}, presence {}",
        counts.occupations, counts.teamwork, counts.customer, counts.communication, counts.presence
    );
    println!(
        "workers in communication-flagged occupations: {}",
        pipeline::group_total(&index, Group::Communication)
    );
    println!("industries: {}", index.mixes.mixes.len());
    Ok(())
}

fn print_report(stage: &CalibrationStage<f64>) {
    let r = &stage.calibration.report;
    let source = if r.eps_fixed { "fixed" } else { "fitted" };
    println!("eps {} ({source})", r.eps);
    println!("contact_cap {}", r.contact_cap);
    println!("k {}", r.k);
    println!("achieved_slope {}", r.achieved_slope);
    println!("achieved_contact_share {}", r.achieved_share);
    println!("cells {}, regions {}, industries {}", r.cells, r.regions, r.industries);
    if !stage.sector_exclusions.removed.is_empty() {
        println!("excluded sectors: {}", stage.sector_exclusions.removed.join(", "));
    }
}

pub fn calibrate(ctx: &Context, targets: &TargetArgs) -> anyhow::Result<()> {
    let ctx = ctx.with_targets(targets)?;
    let comment = ctx.provenance()?;
    let dir = ctx.out_dir()?;
    let stage = ctx.calibration()?;
    print_report(&stage);
    write_file(&dir.join("calibration.csv"), |w| {
        io::write_calibration(w, Some(&comment), &stage.calibration.report)
    })
}

/// Cost ratio along density for the employment-weighted average firm of the calibrated model.
fn calibrated_curve(stage: &CalibrationStage<f64>) -> anyhow::Result<Fig2<f64>> {
    let cells = &stage.calibration.contacts;
    let total: f64 = cells.iter().map(|c| c.employment).collect::<CompensatedSum<f64>>().value();
    let chi: f64 = cells.iter().map(|c| c.employment * c.chi).collect::<CompensatedSum<f64>>().value() / total;
    let (lo, hi) = cells.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.density), hi.max(c.density)));
    let model = &stage.calibration.model;
    let params = FirmParams::from_chi(chi)?;
    let intervention = Intervention::new(model.contact_cap, None)?;
    let hi = if hi > lo { hi } else { lo * 10.0 };
    let grid = counterfactual::log_density_grid(lo, hi, 200)?;
    Ok(counterfactual::fig2_curves(&params, model.eps, &intervention, &grid)?)
}

pub fn subsidy(ctx: &Context, targets: &TargetArgs) -> anyhow::Result<()> {
    let ctx = ctx.with_targets(targets)?;
    let comment = ctx.provenance()?;
    let c = Some(comment.as_str());
    let dir = ctx.out_dir()?;
    let stage = ctx.calibration()?;
    let names = ctx.names()?;
    let groups = match ctx.optional_table("region_groups", &ctx.config().inputs.region_groups)? {
        Some(t) => Some(io::read_region_groups(&t)?),
        None => None,
    };
    let sub = pipeline::subsidy_stage(&stage.calibration, None)?;
    print_report(&stage);
    println!("average wage subsidy {}%", io::pct(sub.sectors.overall.lambda));
    write_file(&dir.join("calibration.csv"), |w| io::write_calibration(w, c, &stage.calibration.report))?;
    write_file(&dir.join("sector-subsidy.csv"), |w| io::write_sector_subsidy(w, c, &sub.sectors, &names))?;
    write_file(&dir.join("location-subsidy.csv"), |w| io::write_location_subsidy(w, c, &sub.locations.table))?;
    if let Some(groups) = &groups {
        let regions = counterfactual::location_table(&sub.results, Some(groups))?;
        write_file(&dir.join("region-subsidy.csv"), |w| io::write_region_subsidy(w, c, &regions.table))?;
    }
    let curve = calibrated_curve(&stage)?;
    write_file(&dir.join("fig2-calibrated.csv"), |w| io::write_fig2(w, c, &curve))
}

pub fn fig2(ctx: &Context, args: &Fig2Args) -> anyhow::Result<()> {
    let mut loaded = ctx.loaded.clone();
    let f = &mut loaded.config.fig2;
    if let Some(v) = args.chi {
        f.chi = v;
    }
    if let Some(v) = args.eps {
        f.eps = v;
    }
    if let Some(v) = args.contact_cap {
        f.contact_cap = v;
    }
    if let Some(v) = args.telecom_cost {
        f.telecom_cost = Some(v);
    }
    if args.no_telecom {
        f.telecom_cost = None;
    }
    if let Some(v) = args.points {
        f.points = v;
    }
    let ctx = Context { loaded };
    let f = &ctx.config().fig2;
    let params = FirmParams::from_chi(f.chi).map_err(|e| usage(format!("fig2.chi: {e}")))?;
    if !(f.eps > 0.0 && f.eps.is_finite()) {
        return Err(usage(format!("fig2.eps {} must be > 0", f.eps)));
    }
    let intervention = Intervention::new(f.contact_cap, f.telecom_cost).map_err(|e| usage(format!("fig2: {e}")))?;
    let grid = counterfactual::log_density_grid(f.min_density, f.max_density, f.points)?;
    let fig = counterfactual::fig2_curves(&params, f.eps, &intervention, &grid)?;
    let comment = ctx.provenance()?;
    let dir = ctx.out_dir()?;
    write_file(&dir.join("fig2.csv"), |w| io::write_fig2(w, Some(&comment), &fig))?;
    write_file(&dir.join("fig2-switches.csv"), |w| io::write_fig2_switches(w, Some(&comment), &fig))?;
    println!("binding density {}", fig.binding_density);
    if let Some(d) = fig.equal_cost_density {
        println!("equal cost density {d}");
    }
    for s in &fig.switches {
        println!("{} -> {} at density {}", s.from.as_str(), s.to.as_str(), s.density);
    }
    Ok(())
}

pub fn lowess(ctx: &Context, args: &LowessArgs) -> anyhow::Result<()> {
    if !(args.bandwidth > 0.0 && args.bandwidth <= 1.0) {
        return Err(usage(format!("--bandwidth {} must lie in (0, 1]", args.bandwidth)));
    }
    let input = match &args.input {
        Some(p) => absolute(p)?,
        None => ctx.loaded.output_dir().join("location-index.csv"),
    };
    if !input.is_file() {
        return Err(usage(format!("{} does not exist", input.display())));
    }
    let table = Table::open(&input)?;
    let points = io::read_lowess_points::<f64>(&table, &args.x, &args.y, args.weight.as_deref(), args.log_x)?;
    let curve = lowess::lowess_curve(&points, args.bandwidth)?;
    let output = match &args.output {
        Some(p) => absolute(p)?,
        None => ctx.out_dir()?.join("lowess.csv"),
    };
    let comment = format!(
        "{} lowess x={} y={} bandwidth={}",
        ctx.provenance()?,
        args.x,
        args.y,
        args.bandwidth
    );
    write_file(&output, |w| io::write_curve(w, Some(&comment), &curve))
}
