//! CSV readers and writers for the pipeline's input and output files.
//!
//! Readers skip lines starting with `#`, match headers case-insensitively and
//! report errors with the file name and line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::calibrate::CalibrationReport;
use crate::counterfactual::{Fig2, SubsidyTable};
use crate::error::{Error, Result};
use crate::geo::{CbpRecord, DensityRecord, LocationExposure, NationalSizes, SizeBin};
use crate::industry::{Concordance, Group, IndustryMix, MatrixRow};
use crate::lowess::{Curve, WeightedPoint};
use crate::occupation::{task_key, Classification, ContextItem, OccupationProfile, SocCode};
use crate::scalar::{lit, Real};

/// A parsed CSV file: header plus records with their line numbers.
pub struct Table {
    name: String,
    columns: BTreeMap<String, usize>,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(path.display().to_string(), file)
    }

    pub fn from_reader(name: impl Into<String>, reader: impl Read) -> Result<Self> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let csv_err = |name: &str, e: csv::Error| {
            let line = e.position().map(|p| p.line());
            Error::ingestion(name, line, e.to_string())
        };
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(&name, e))?
            .iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
            .collect();
        let mut columns = BTreeMap::new();
        for (i, h) in headers.iter().enumerate() {
            if columns.insert(h.to_lowercase(), i).is_some() {
                return Err(Error::ingestion(&name, Some(1), format!("duplicate column {h:?}")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(&name, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Self {
            name,
            columns,
            headers,
            rows,
        })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.get(&name.to_lowercase()).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::ingestion(&self.name, Some(1), format!("missing column {name:?}")))
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().map(move |(line, record)| Row {
            source: &self.name,
            line: *line,
            record,
        })
    }
}

pub struct Row<'a> {
    source: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn line(&self) -> u64 {
        self.line
    }

    pub fn str(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("")
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::ingestion(self.source, Some(self.line), message)
    }

    pub fn parse<V: FromStr>(&self, col: usize, what: &str) -> Result<V> {
        let raw = self.str(col);
        raw.parse()
            .map_err(|_| self.error(format!("{what}: cannot parse {raw:?}")))
    }

    pub fn real<T: Real>(&self, col: usize, what: &str) -> Result<T> {
        let v: f64 = self.parse(col, what)?;
        if !v.is_finite() {
            return Err(self.error(format!("{what}: {v} is not finite")));
        }
        Ok(lit(v))
    }

    pub fn optional_real<T: Real>(&self, col: usize, what: &str) -> Result<Option<T>> {
        if self.str(col).is_empty() {
            Ok(None)
        } else {
            self.real(col, what).map(Some)
        }
    }

    /// Rewrites errors from lower layers to carry this row's position.
    pub fn locate(&self, e: Error) -> Error {
        match e {
            Error::Ingestion { message, .. } => self.error(message),
            other => self.error(other.to_string()),
        }
    }
}

fn parse_flag(row: &Row<'_>, col: usize) -> Result<bool> {
    match row.str(col).to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" | "n" => Ok(false),
        "1" | "true" | "yes" | "y" | "s" | "d" => Ok(true),
        other => Err(row.error(format!("suppressed: cannot parse {other:?} as a flag"))),
    }
}

/// Occupation profiles. Every column other than `soc_code`, `title` and the
/// `ctx_*` columns is a task score; empty cells are missing values.
pub fn read_occupations<T: Real>(table: &Table) -> Result<Vec<OccupationProfile<T>>> {
    let soc = table.require("soc_code")?;
    let title = table.column("title");
    let contexts: Vec<(ContextItem, usize)> = ContextItem::ALL
        .into_iter()
        .filter_map(|item| table.column(item.column()).map(|c| (item, c)))
        .collect();
    let context_cols: Vec<usize> = contexts.iter().map(|(_, c)| *c).collect();
    let tasks: Vec<(String, usize)> = table
        .headers()
        .iter()
        .enumerate()
        .filter(|(i, h)| Some(*i) != Some(soc) && Some(*i) != title && !context_cols.contains(i) && !h.is_empty())
        .map(|(i, h)| (task_key(h), i))
        .collect();
    let mut out = Vec::with_capacity(table.len());
    for row in table.rows() {
        let code: SocCode = row.str(soc).parse().map_err(|e| row.locate(e))?;
        let name = title.map(|c| row.str(c)).unwrap_or("");
        let mut profile = OccupationProfile::new(code, name);
        for (task, col) in &tasks {
            if let Some(score) = row.optional_real::<T>(*col, task)? {
                profile.set_task(task, score).map_err(|e| row.locate(e))?;
            }
        }
        for (item, col) in &contexts {
            if row.str(*col).is_empty() {
                continue;
            }
            let level: u8 = row.parse(*col, item.column())?;
            profile.set_context(*item, level).map_err(|e| row.locate(e))?;
        }
        out.push(profile);
    }
    Ok(out)
}

pub fn read_matrix<T: Real>(table: &Table) -> Result<Vec<MatrixRow<T>>> {
    let (ind, soc, emp) = (table.require("industry_code")?, table.require("soc_code")?, table.require("employment")?);
    table
        .rows()
        .map(|row| {
            Ok(MatrixRow {
                industry_code: row.str(ind).to_string(),
                soc_code: row.str(soc).parse().map_err(|e| row.locate(e))?,
                employment: row.real(emp, "employment")?,
            })
        })
        .collect()
}

pub fn read_cbp(table: &Table) -> Result<Vec<CbpRecord>> {
    let (zcta, naics, bin, estabs) = (
        table.require("zcta")?,
        table.require("naics")?,
        table.require("size_bin")?,
        table.require("establishments")?,
    );
    let suppressed = table.column("suppressed");
    table
        .rows()
        .map(|row| {
            let size_bin = match row.str(bin) {
                "" => None,
                s => Some(s.parse::<SizeBin>().map_err(|e| row.locate(e))?),
            };
            Ok(CbpRecord {
                zcta: row.str(zcta).to_string(),
                naics: row.str(naics).to_string(),
                size_bin,
                establishments: row.parse(estabs, "establishments")?,
                suppressed: match suppressed {
                    Some(c) => parse_flag(&row, c)?,
                    None => false,
                },
            })
        })
        .collect()
}

pub fn read_density<T: Real>(table: &Table) -> Result<Vec<DensityRecord<T>>> {
    let (zcta, pop, area) = (table.require("zcta")?, table.require("population")?, table.require("land_area_km2")?);
    table
        .rows()
        .map(|row| {
            Ok(DensityRecord {
                zcta: row.str(zcta).to_string(),
                population: row.real(pop, "population")?,
                land_area: row.real(area, "land_area_km2")?,
            })
        })
        .collect()
}

pub fn read_national_sizes<T: Real>(table: &Table) -> Result<NationalSizes<T>> {
    let (naics, bin, estabs, emp) = (
        table.require("naics")?,
        table.require("size_bin")?,
        table.require("establishments")?,
        table.require("employment")?,
    );
    let mut sizes = NationalSizes::new();
    for row in table.rows() {
        let b: SizeBin = row.str(bin).parse().map_err(|e| row.locate(e))?;
        sizes
            .insert(row.str(naics), b, row.parse(estabs, "establishments")?, row.real(emp, "employment")?)
            .map_err(|e| row.locate(e))?;
    }
    Ok(sizes)
}

/// Codes in the `naics` column (or the first column).
pub fn read_exclusions(table: &Table) -> Result<Vec<String>> {
    let col = table.column("naics").unwrap_or(0);
    Ok(table
        .rows()
        .map(|row| row.str(col).to_string())
        .filter(|c| !c.is_empty())
        .collect())
}

/// `zcta,region` pairs.
pub fn read_region_groups(table: &Table) -> Result<BTreeMap<String, String>> {
    let (zcta, region) = (table.require("zcta")?, table.require("region")?);
    let mut out = BTreeMap::new();
    for row in table.rows() {
        if let Some(prev) = out.insert(row.str(zcta).to_string(), row.str(region).to_string()) {
            return Err(row.error(format!("zcta {} already assigned to {prev}", row.str(zcta))));
        }
    }
    Ok(out)
}

/// `naics,industry_code` pairs mapping establishment codes to matrix industries.
pub fn read_concordance(table: &Table) -> Result<Concordance> {
    let (naics, industry) = (table.require("naics")?, table.require("industry_code")?);
    let mut out = Concordance::new();
    for row in table.rows() {
        out.insert(row.str(naics).to_string(), row.str(industry).to_string());
    }
    Ok(out)
}

/// `industry_code,name` pairs.
pub fn read_industry_names(table: &Table) -> Result<BTreeMap<String, String>> {
    let (code, name) = (table.require("industry_code")?, table.require("name")?);
    Ok(table
        .rows()
        .map(|row| (row.str(code).to_string(), row.str(name).to_string()))
        .collect())
}

/// Points from columns `x` and `y`, weighted by column `weight` (default 1).
///
/// Rows with an empty `x` or `y` are skipped; with `log_x` so are rows with `x <= 0`,
/// and the remaining `x` values are replaced by their logarithm.
pub fn read_lowess_points<T: Real>(
    table: &Table,
    x: &str,
    y: &str,
    weight: Option<&str>,
    log_x: bool,
) -> Result<Vec<WeightedPoint<T>>> {
    let (xc, yc) = (table.require(x)?, table.require(y)?);
    let wc = weight.map(|w| table.require(w)).transpose()?;
    let mut out = Vec::with_capacity(table.len());
    let mut skipped = 0usize;
    for row in table.rows() {
        let (Some(xv), Some(yv)) = (row.optional_real::<T>(xc, x)?, row.optional_real::<T>(yc, y)?) else {
            skipped += 1;
            continue;
        };
        if log_x && !(xv > T::zero()) {
            skipped += 1;
            continue;
        }
        let weight = match wc {
            Some(c) => row.real(c, "weight")?,
            None => T::one(),
        };
        out.push(WeightedPoint {
            x: if log_x { xv.ln() } else { xv },
            y: yv,
            weight,
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} rows without usable {x}/{y} values skipped");
    }
    Ok(out)
}

/// CSV writer that puts an optional `#` comment line above the header.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvOut<W> {
    pub fn new(mut out: W, comment: Option<&str>, header: &[&str]) -> Result<Self> {
        if let Some(c) = comment {
            writeln!(out, "# {c}").map_err(io_err)?;
        }
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        inner.write_record(header).map_err(csv_write_err)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_write_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(io_err)
    }
}

fn io_err(source: std::io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source,
    }
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::ingestion("<output>", None, e.to_string())
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Percentage with one decimal.
pub fn pct<T: Real>(fraction: T) -> String {
    format!("{:.1}", fraction.to_f64().unwrap_or(f64::NAN) * 100.0)
}

pub fn write_occupation_flags<W: Write>(out: W, comment: Option<&str>, c: &Classification) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["soc_code", "title", "teamwork", "customer", "communication", "presence"])?;
    for (soc, f) in &c.flags {
        let title = c.titles.get(soc).map(String::as_str).unwrap_or("");
        w.row([soc.as_str(), title, flag(f.teamwork()), flag(f.customer()), flag(f.communication()), flag(f.presence())])?;
    }
    w.finish()
}

pub fn write_industry_index<W: Write, T: Real>(
    out: W,
    comment: Option<&str>,
    mixes: &[IndustryMix<T>],
    names: &BTreeMap<String, String>,
) -> Result<()> {
    let mut w = CsvOut::new(
        out,
        comment,
        &["industry_code", "name", "chi_teamwork", "chi_customer", "chi_communication", "chi_presence"],
    )?;
    for m in mixes {
        let name = names.get(&m.industry_code).cloned().unwrap_or_default();
        let mut fields = vec![m.industry_code.clone(), name];
        fields.extend(Group::ALL.iter().map(|g| m.chi.get(*g).to_string()));
        w.row(&fields)?;
    }
    w.finish()
}

pub fn write_location_index<W: Write, T: Real>(out: W, comment: Option<&str>, regions: &[LocationExposure<T>]) -> Result<()> {
    let mut w = CsvOut::new(
        out,
        comment,
        &[
            "zcta",
            "density",
            "share_teamwork",
            "share_customer",
            "share_communication",
            "share_presence",
            "employment",
        ],
    )?;
    for r in regions {
        let mut fields = vec![r.zcta.clone(), r.density.map(|d| d.to_string()).unwrap_or_default()];
        fields.extend(Group::ALL.iter().map(|g| r.shares.get(*g).to_string()));
        fields.push(r.employment.to_string());
        w.row(&fields)?;
    }
    w.finish()
}

pub fn write_sector_subsidy<W: Write, T: Real>(
    out: W,
    comment: Option<&str>,
    table: &SubsidyTable<T>,
    names: &BTreeMap<String, String>,
) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["industry", "wage_subsidy_pct", "employment_thousands"])?;
    let thousands = |e: T| format!("{:.1}", e.to_f64().unwrap_or(f64::NAN) / 1000.0);
    for r in &table.rows {
        let label = names.get(&r.key).cloned().unwrap_or_else(|| r.key.clone());
        w.row([label, pct(r.lambda), thousands(r.employment)])?;
    }
    w.row(["Average".to_string(), pct(table.overall.lambda), thousands(table.overall.employment)])?;
    w.finish()
}

pub fn write_location_subsidy<W: Write, T: Real>(out: W, comment: Option<&str>, table: &SubsidyTable<T>) -> Result<()> {
    keyed_subsidy(out, comment, "zcta", table)
}

/// Same layout as the location table, keyed by region name.
pub fn write_region_subsidy<W: Write, T: Real>(out: W, comment: Option<&str>, table: &SubsidyTable<T>) -> Result<()> {
    keyed_subsidy(out, comment, "region", table)
}

fn keyed_subsidy<W: Write, T: Real>(out: W, comment: Option<&str>, key: &str, table: &SubsidyTable<T>) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &[key, "wage_subsidy_pct", "employment"])?;
    for r in table.rows.iter() {
        w.row([r.key.clone(), pct(r.lambda), format!("{:.1}", r.employment.to_f64().unwrap_or(f64::NAN))])?;
    }
    w.row([
        "Average".to_string(),
        pct(table.overall.lambda),
        format!("{:.1}", table.overall.employment.to_f64().unwrap_or(f64::NAN)),
    ])?;
    w.finish()
}

pub fn write_fig2<W: Write, T: Real>(out: W, comment: Option<&str>, fig: &Fig2<T>) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["density", "distancing_ratio", "telecom_ratio", "regime"])?;
    for p in &fig.points {
        w.row([
            p.density.to_string(),
            p.distancing.to_string(),
            p.telecom.map(|t| t.to_string()).unwrap_or_default(),
            p.regime.as_str().to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_fig2_switches<W: Write, T: Real>(out: W, comment: Option<&str>, fig: &Fig2<T>) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["density", "from", "to"])?;
    for s in &fig.switches {
        w.row([s.density.to_string(), s.from.as_str().to_string(), s.to.as_str().to_string()])?;
    }
    w.finish()
}

pub fn write_calibration<W: Write, T: Real>(out: W, comment: Option<&str>, r: &CalibrationReport<T>) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["metric", "value"])?;
    let rows = [
        ("eps", r.eps.to_string()),
        ("eps_fixed", flag(r.eps_fixed).to_string()),
        ("contact_cap", r.contact_cap.to_string()),
        ("k", r.k.to_string()),
        ("achieved_slope", r.achieved_slope.to_string()),
        ("achieved_contact_share", r.achieved_share.to_string()),
        ("cells", r.cells.to_string()),
        ("regions", r.regions.to_string()),
        ("industries", r.industries.to_string()),
    ];
    for (k, v) in rows {
        w.row([k, v.as_str()])?;
    }
    w.finish()
}

pub fn write_curve<W: Write, T: Real>(out: W, comment: Option<&str>, curve: &Curve<T>) -> Result<()> {
    let mut w = CsvOut::new(out, comment, &["x", "y"])?;
    for (x, y) in curve.x.iter().zip(&curve.y) {
        w.row([x.to_string(), y.to_string()])?;
    }
    w.finish()
}
