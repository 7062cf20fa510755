//! Industry occupation mixes and the exposure shares `χ_i` they imply.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::occupation::{ExposureFlags, SocCode};
use crate::scalar::{compensated_sum, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Teamwork,
    Customer,
    Communication,
    Presence,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Teamwork, Group::Customer, Group::Communication, Group::Presence];

    pub fn flagged(&self, flags: &ExposureFlags) -> bool {
        match self {
            Group::Teamwork => flags.teamwork(),
            Group::Customer => flags.customer(),
            Group::Communication => flags.communication(),
            Group::Presence => flags.presence(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Teamwork => "teamwork",
            Group::Customer => "customer",
            Group::Communication => "communication",
            Group::Presence => "presence",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Argument(format!("unknown group {s:?}")))
    }
}

/// One value per exposure group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupShares<T> {
    pub teamwork: T,
    pub customer: T,
    pub communication: T,
    pub presence: T,
}

impl<T: Copy> GroupShares<T> {
    pub fn get(&self, group: Group) -> T {
        match group {
            Group::Teamwork => self.teamwork,
            Group::Customer => self.customer,
            Group::Communication => self.communication,
            Group::Presence => self.presence,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Group) -> T) -> Self {
        Self {
            teamwork: f(Group::Teamwork),
            customer: f(Group::Customer),
            communication: f(Group::Communication),
            presence: f(Group::Presence),
        }
    }
}

/// One row of the industry-occupation employment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow<T> {
    pub industry_code: String,
    pub soc_code: SocCode,
    pub employment: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryMix<T> {
    pub industry_code: String,
    /// Employment shares of the classified occupations, summing to one.
    pub shares: BTreeMap<SocCode, T>,
    pub chi: GroupShares<T>,
    /// Matrix employment over the classified occupations.
    pub employment: T,
}

#[derive(Debug, Clone, Default)]
pub struct MixReport<T> {
    pub mixes: Vec<IndustryMix<T>>,
    /// Soc codes present in the matrix but not classified, with their total employment.
    /// They are left out of the share denominators.
    pub unknown_soc: BTreeMap<SocCode, T>,
    /// Industries without positive classified employment.
    pub skipped: Vec<String>,
}

/// Builds per-industry occupation shares and group exposure shares.
///
/// Rows are aggregated per (industry, occupation) with order-independent sums, so
/// permuting the matrix never changes the result.
pub fn build_mix<T: Real>(rows: &[MatrixRow<T>], flags: &BTreeMap<SocCode, ExposureFlags>) -> Result<MixReport<T>> {
    let mut cells: BTreeMap<&str, BTreeMap<&SocCode, Vec<T>>> = BTreeMap::new();
    let mut unknown: BTreeMap<SocCode, Vec<T>> = BTreeMap::new();
    for row in rows {
        if !(row.employment >= T::zero() && row.employment.is_finite()) {
            return Err(Error::ingestion(
                "matrix",
                None,
                format!(
                    "industry {} occupation {}: employment {} must be finite and >= 0",
                    row.industry_code, row.soc_code, row.employment
                ),
            ));
        }
        let industry = cells.entry(row.industry_code.as_str()).or_default();
        if flags.contains_key(&row.soc_code) {
            industry.entry(&row.soc_code).or_default().push(row.employment);
        } else {
            unknown.entry(row.soc_code.clone()).or_default().push(row.employment);
        }
    }

    let mut report = MixReport {
        unknown_soc: unknown.into_iter().map(|(k, v)| (k, sorted_sum(v))).collect(),
        ..MixReport::default()
    };
    for (soc, emp) in &report.unknown_soc {
        log::warn!("occupation {soc} in matrix ({emp} employed) has no exposure flags; left out of shares");
    }

    for (code, occupations) in cells {
        let employment: BTreeMap<&SocCode, T> = occupations.into_iter().map(|(k, v)| (k, sorted_sum(v))).collect();
        let total = compensated_sum(employment.values().copied());
        if !(total > T::zero()) {
            log::warn!("industry {code} has no classified employment; skipped");
            report.skipped.push(code.to_string());
            continue;
        }
        let shares: BTreeMap<SocCode, T> = employment.iter().map(|(s, e)| ((*s).clone(), *e / total)).collect();
        let chi = GroupShares::from_fn(|g| {
            let flagged = compensated_sum(
                employment
                    .iter()
                    .filter(|(soc, _)| g.flagged(&flags[**soc]))
                    .map(|(_, e)| *e),
            );
            (flagged / total).min(T::one())
        });
        report.mixes.push(IndustryMix {
            industry_code: code.to_string(),
            shares,
            chi,
            employment: total,
        });
    }
    Ok(report)
}

fn sorted_sum<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite employment"));
    compensated_sum(v)
}

#[derive(Debug, Clone)]
pub struct Ranking<'a, T> {
    pub top: Vec<&'a IndustryMix<T>>,
    /// The last `k` industries of the descending order, still in descending order.
    pub bottom: Vec<&'a IndustryMix<T>>,
}

/// Orders industries by a group's share, descending; ties by industry code ascending.
pub fn sort_by_group<T: Real>(mixes: &[IndustryMix<T>], group: Group) -> Vec<&IndustryMix<T>> {
    let mut sorted: Vec<&IndustryMix<T>> = mixes.iter().collect();
    sorted.sort_by(|a, b| {
        b.chi
            .get(group)
            .partial_cmp(&a.chi.get(group))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.industry_code.cmp(&b.industry_code))
    });
    sorted
}

pub fn rank_industries<T: Real>(mixes: &[IndustryMix<T>], group: Group, k: usize) -> Result<Ranking<'_, T>> {
    if k == 0 {
        return Err(Error::Argument("ranking size k must be >= 1".into()));
    }
    let sorted = sort_by_group(mixes, group);
    let top = sorted.iter().take(k).copied().collect();
    let bottom = sorted[sorted.len().saturating_sub(k)..].to_vec();
    Ok(Ranking { top, bottom })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionReport {
    pub removed: Vec<String>,
    /// Requested exclusions that matched no industry.
    pub absent: Vec<String>,
}

/// Removes industries whose code matches an exclusion exactly.
pub fn exclude_sectors<T: Real>(mixes: Vec<IndustryMix<T>>, exclusions: &[String]) -> (Vec<IndustryMix<T>>, ExclusionReport) {
    let wanted: BTreeSet<&str> = exclusions.iter().map(|s| s.as_str()).collect();
    let mut report = ExclusionReport::default();
    let mut kept = Vec::with_capacity(mixes.len());
    for mix in mixes {
        if wanted.contains(mix.industry_code.as_str()) {
            report.removed.push(mix.industry_code.clone());
        } else {
            kept.push(mix);
        }
    }
    let removed: BTreeSet<&str> = report.removed.iter().map(|s| s.as_str()).collect();
    report.absent = wanted.iter().filter(|c| !removed.contains(**c)).map(|c| c.to_string()).collect();
    for code in &report.absent {
        log::warn!("excluded sector {code} not present among industries");
    }
    (kept, report)
}

/// Strips CBP padding (`44----`, `4411//`) and whitespace from a NAICS code.
pub fn normalize_naics(code: &str) -> &str {
    code.trim().trim_end_matches(['-', '/'])
}

/// NAICS prefix to industry-code mapping for codes that are not industries themselves.
pub type Concordance = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy)]
pub struct Resolved<'a, T> {
    pub mix: &'a IndustryMix<T>,
    /// False when the code was matched through an ancestor or the concordance.
    pub exact: bool,
}

/// Finds the industry mix for a detailed NAICS code.
///
/// Walks from the full code toward shorter prefixes; at each prefix an industry
/// with that code wins, then a concordance entry.
#[derive(Debug, Clone)]
pub struct MixResolver<'a, T> {
    by_code: BTreeMap<&'a str, &'a IndustryMix<T>>,
    concordance: &'a Concordance,
}

impl<'a, T: Real> MixResolver<'a, T> {
    pub fn new(mixes: &'a [IndustryMix<T>], concordance: &'a Concordance) -> Self {
        Self {
            by_code: mixes.iter().map(|m| (m.industry_code.as_str(), m)).collect(),
            concordance,
        }
    }

    pub fn resolve(&self, naics: &str) -> Option<Resolved<'a, T>> {
        let code = normalize_naics(naics);
        for len in (1..=code.len()).rev() {
            if !code.is_char_boundary(len) {
                continue;
            }
            let prefix = &code[..len];
            if let Some(mix) = self.by_code.get(prefix) {
                return Some(Resolved {
                    mix,
                    exact: len == code.len(),
                });
            }
            if let Some(target) = self.concordance.get(prefix) {
                if let Some(mix) = self.by_code.get(target.as_str()) {
                    return Some(Resolved { mix, exact: false });
                }
            }
        }
        None
    }
}
