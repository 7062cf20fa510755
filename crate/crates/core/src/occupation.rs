//! Occupation-level exposure flags from task-activity scores and work-context frequencies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

pub const TEAMWORK_TASKS: [&str; 5] = [
    "Work With Work Group or Team",
    "Provide Consultation and Advice to Others",
    "Coordinating the Work and Activities of Others",
    "Guiding, Directing, and Motivating Subordinates",
    "Developing and Building Teams",
];

pub const CUSTOMER_TASKS: [&str; 5] = [
    "Deal With External Customers",
    "Performing for or Working Directly with the Public",
    "Assisting and Caring for Others",
    "Provide Consultation and Advice to Others",
    "Establishing and Maintaining Interpersonal Relationships",
];

pub const PRESENCE_TASKS: [&str; 5] = [
    "Handling and Moving Objects",
    "Operating Vehicles, Mechanized Devices, or Equipment",
    "Repairing and Maintaining Electronic Equipment",
    "Repairing and Maintaining Mechanical Equipment",
    "Inspecting Equipment, Structures, or Material",
];

/// Canonical key for a task name: lowercase alphanumeric words joined by `_`.
///
/// `"Guiding, Directing, and Motivating Subordinates"` and
/// `"guiding_directing_and_motivating_subordinates"` map to the same key.
pub fn task_key(name: &str) -> String {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

/// 2010-SOC detailed occupation code, `NN-NNNN`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SocCode(String);

impl SocCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for SocCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let b = s.as_bytes();
        let ok = b.len() == 7
            && b[2] == b'-'
            && b.iter().enumerate().all(|(i, c)| i == 2 || c.is_ascii_digit());
        if ok {
            Ok(SocCode(s.to_string()))
        } else {
            Err(Error::ingestion("soc_code", None, format!("{s:?} is not a 6-digit SOC code (NN-NNNN)")))
        }
    }
}

impl fmt::Display for SocCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextItem {
    FaceToFace,
    Email,
    Letters,
    Proximity,
}

impl ContextItem {
    pub const ALL: [ContextItem; 4] = [
        ContextItem::FaceToFace,
        ContextItem::Email,
        ContextItem::Letters,
        ContextItem::Proximity,
    ];

    /// Column name in the occupation input file.
    pub fn column(&self) -> &'static str {
        match self {
            ContextItem::FaceToFace => "ctx_face_to_face",
            ContextItem::Email => "ctx_email",
            ContextItem::Letters => "ctx_letters",
            ContextItem::Proximity => "ctx_proximity",
        }
    }
}

impl fmt::Display for ContextItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextItem::FaceToFace => "face-to-face discussions",
            ContextItem::Email => "electronic mail",
            ContextItem::Letters => "letters and memos",
            ContextItem::Proximity => "physical proximity",
        })
    }
}

/// Task importance scores (0-100) and work-context levels (1-5) for one occupation.
#[derive(Debug, Clone)]
pub struct OccupationProfile<T> {
    pub soc_code: SocCode,
    pub title: String,
    task_scores: BTreeMap<String, T>,
    context_levels: BTreeMap<ContextItem, u8>,
}

impl<T: Real> OccupationProfile<T> {
    pub fn new(soc_code: SocCode, title: impl Into<String>) -> Self {
        Self {
            soc_code,
            title: title.into(),
            task_scores: BTreeMap::new(),
            context_levels: BTreeMap::new(),
        }
    }

    pub fn with_task(mut self, name: &str, score: T) -> Result<Self> {
        self.set_task(name, score)?;
        Ok(self)
    }

    pub fn with_context(mut self, item: ContextItem, level: u8) -> Result<Self> {
        self.set_context(item, level)?;
        Ok(self)
    }

    pub fn set_task(&mut self, name: &str, score: T) -> Result<()> {
        if !(score >= T::zero() && score <= lit(100.0)) {
            return Err(Error::ingestion(
                self.soc_code.as_str(),
                None,
                format!("task score {name:?} = {score} outside [0, 100]"),
            ));
        }
        self.task_scores.insert(task_key(name), score);
        Ok(())
    }

    pub fn set_context(&mut self, item: ContextItem, level: u8) -> Result<()> {
        if !(1..=5).contains(&level) {
            return Err(Error::ingestion(
                self.soc_code.as_str(),
                None,
                format!("{item} level {level} outside 1..=5"),
            ));
        }
        self.context_levels.insert(item, level);
        Ok(())
    }

    pub fn task_score(&self, name: &str) -> Option<T> {
        self.task_scores.get(&task_key(name)).copied()
    }

    pub fn context_level(&self, item: ContextItem) -> Option<u8> {
        self.context_levels.get(&item).copied()
    }

    fn require_context(&self, item: ContextItem) -> Result<u8> {
        self.context_level(item).ok_or_else(|| Error::Classification {
            soc: self.soc_code.to_string(),
            item: format!("context item {item}"),
        })
    }
}

/// Cutoffs for the classification rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    /// The composite index must strictly exceed this value.
    pub cutoff: T,
    /// Face-to-face level meaning "several times a week".
    pub frequent_level: u8,
    /// Proximity level meaning "shared office".
    pub proximity_level: u8,
}

impl<T: Real> Default for Thresholds<T> {
    fn default() -> Self {
        Self {
            cutoff: lit(62.5),
            frequent_level: 4,
            proximity_level: 3,
        }
    }
}

impl<T: Real> Thresholds<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff >= T::zero() && self.cutoff <= lit(100.0)) {
            return Err(Error::Argument(format!("cutoff {} outside [0, 100]", self.cutoff)));
        }
        for (name, level) in [("frequent_level", self.frequent_level), ("proximity_level", self.proximity_level)] {
            if !(1..=5).contains(&level) {
                return Err(Error::Argument(format!("{name} {level} outside 1..=5")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExposureFlags {
    teamwork: bool,
    customer: bool,
    presence: bool,
    communication: bool,
}

impl ExposureFlags {
    pub fn new(teamwork: bool, customer: bool, presence: bool) -> Self {
        Self {
            teamwork,
            customer,
            presence,
            communication: teamwork || customer,
        }
    }

    pub fn teamwork(&self) -> bool {
        self.teamwork
    }

    pub fn customer(&self) -> bool {
        self.customer
    }

    pub fn presence(&self) -> bool {
        self.presence
    }

    /// Teamwork-intensive or customer-facing.
    pub fn communication(&self) -> bool {
        self.communication
    }

    /// Communication-intensive or presence-requiring.
    pub fn any(&self) -> bool {
        self.communication || self.presence
    }
}

/// Arithmetic mean of the named task scores.
pub fn composite_index<T: Real>(profile: &OccupationProfile<T>, component_tasks: &[&str]) -> Result<T> {
    if component_tasks.is_empty() {
        return Err(Error::Argument("composite index needs at least one task".into()));
    }
    let mut total = T::zero();
    for &task in component_tasks {
        let score = profile.task_score(task).ok_or_else(|| Error::Classification {
            soc: profile.soc_code.to_string(),
            item: format!("task {task:?}"),
        })?;
        total = total + score;
    }
    Ok(total / lit(component_tasks.len() as f64))
}

/// What to do with an occupation that lacks a work-context item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingContext {
    #[default]
    Error,
    /// Classify the occupation as not exposed in the affected group.
    FailClosed,
}

fn context_or<T: Real>(
    profile: &OccupationProfile<T>,
    item: ContextItem,
    missing: MissingContext,
) -> Result<Option<u8>> {
    match (profile.context_level(item), missing) {
        (Some(level), _) => Ok(Some(level)),
        (None, MissingContext::FailClosed) => Ok(None),
        (None, MissingContext::Error) => profile.require_context(item).map(Some),
    }
}

pub fn classify_teamwork<T: Real>(
    profile: &OccupationProfile<T>,
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<bool> {
    let composite = composite_index(profile, &TEAMWORK_TASKS)?;
    let f2f = context_or(profile, ContextItem::FaceToFace, missing)?;
    let email = context_or(profile, ContextItem::Email, missing)?;
    let letters = context_or(profile, ContextItem::Letters, missing)?;
    let (Some(f2f), Some(email), Some(letters)) = (f2f, email, letters) else {
        return Ok(false);
    };
    Ok(composite > thresholds.cutoff && f2f >= thresholds.frequent_level && f2f > email && f2f > letters)
}

pub fn classify_customer<T: Real>(
    profile: &OccupationProfile<T>,
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<bool> {
    let composite = composite_index(profile, &CUSTOMER_TASKS)?;
    let Some(f2f) = context_or(profile, ContextItem::FaceToFace, missing)? else {
        return Ok(false);
    };
    Ok(composite > thresholds.cutoff && f2f >= thresholds.frequent_level)
}

pub fn classify_presence<T: Real>(
    profile: &OccupationProfile<T>,
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<bool> {
    let composite = composite_index(profile, &PRESENCE_TASKS)?;
    let Some(proximity) = context_or(profile, ContextItem::Proximity, missing)? else {
        return Ok(false);
    };
    Ok(composite > thresholds.cutoff && proximity >= thresholds.proximity_level)
}

pub fn classify<T: Real>(
    profile: &OccupationProfile<T>,
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<ExposureFlags> {
    Ok(ExposureFlags::new(
        classify_teamwork(profile, thresholds, missing)?,
        classify_customer(profile, thresholds, missing)?,
        classify_presence(profile, thresholds, missing)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FlagCounts {
    pub occupations: usize,
    pub teamwork: usize,
    pub customer: usize,
    pub communication: usize,
    pub presence: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub flags: BTreeMap<SocCode, ExposureFlags>,
    pub titles: BTreeMap<SocCode, String>,
    pub counts: FlagCounts,
}

/// Classifies every occupation. Soc codes must be unique.
pub fn classify_all<T: Real>(
    profiles: &[OccupationProfile<T>],
    thresholds: &Thresholds<T>,
    missing: MissingContext,
) -> Result<Classification> {
    thresholds.validate()?;
    let mut titles = BTreeMap::new();
    for p in profiles {
        if titles.insert(p.soc_code.clone(), p.title.clone()).is_some() {
            return Err(Error::ingestion(
                "occupations",
                None,
                format!("duplicate soc code {}", p.soc_code),
            ));
        }
    }
    let classified: Vec<(SocCode, ExposureFlags)> = profiles
        .par_iter()
        .map(|p| classify(p, thresholds, missing).map(|f| (p.soc_code.clone(), f)))
        .collect::<Result<_>>()?;
    let flags: BTreeMap<_, _> = classified.into_iter().collect();
    let mut counts = FlagCounts {
        occupations: flags.len(),
        ..FlagCounts::default()
    };
    for f in flags.values() {
        counts.teamwork += f.teamwork as usize;
        counts.customer += f.customer as usize;
        counts.communication += f.communication as usize;
        counts.presence += f.presence as usize;
    }
    log::info!(
        "classified {} occupations: teamwork {}, customer {}, communication {}, presence {}",
        counts.occupations,
        counts.teamwork,
        counts.customer,
        counts.communication,
        counts.presence
    );
    Ok(Classification { flags, titles, counts })
}
