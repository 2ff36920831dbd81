//! Fleiss kappa and the eight-judge acceptance rule.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Emotion;
use crate::error::{Error, Result};

pub const JUDGES: usize = 8;
pub const ACCEPT_VOTES: usize = 5;

/// Category counts per subject; every row sums to the same rater count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingMatrix {
    counts: Vec<u32>,
    subjects: usize,
    categories: usize,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(rows: &[Vec<u32>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Rating("no subjects".into()));
        };
        let categories = first.len();
        if categories == 0 {
            return Err(Error::Rating("no categories".into()));
        }
        let raters: u32 = first.iter().sum();
        if raters < 2 {
            return Err(Error::Rating(format!(
                "need at least two raters per subject, got {raters}"
            )));
        }
        let mut counts = Vec::with_capacity(rows.len() * categories);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != categories {
                return Err(Error::Rating(format!(
                    "subject {i} has {} categories, expected {categories}",
                    row.len()
                )));
            }
            let sum: u32 = row.iter().sum();
            if sum != raters {
                return Err(Error::Rating(format!(
                    "subject {i} has {sum} ratings, expected {raters}"
                )));
            }
            counts.extend_from_slice(row);
        }
        Ok(Self {
            counts,
            subjects: rows.len(),
            categories,
            raters,
        })
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.categories..(i + 1) * self.categories]
    }
}

/// Intermediate quantities and the statistic itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    #[serde(rename = "N")]
    pub subjects: usize,
    #[serde(rename = "n")]
    pub raters: u32,
    #[serde(rename = "k")]
    pub categories: usize,
    pub p_bar_o: f64,
    pub p_bar_e: f64,
    pub kappa: f64,
}

pub fn fleiss_report(m: &RatingMatrix) -> Result<KappaReport> {
    let n = f64::from(m.raters);
    let big_n = m.subjects as f64;
    let mut p_o = 0.0;
    let mut col = vec![0u64; m.categories];
    for i in 0..m.subjects {
        let row = m.row(i);
        let sq: u64 = row.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
        p_o += (sq as f64 - n) / (n * (n - 1.0));
        for (c, &v) in col.iter_mut().zip(row) {
            *c += u64::from(v);
        }
    }
    p_o /= big_n;
    let p_e: f64 = col.iter().map(|&c| (c as f64 / (big_n * n)).powi(2)).sum();
    let all_agree = (0..m.subjects).all(|i| m.row(i).contains(&m.raters));
    let kappa = if all_agree {
        1.0
    } else if p_e >= 1.0 {
        return Err(Error::Degenerate(format!(
            "chance agreement is 1 while observed agreement is {p_o}"
        )));
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(KappaReport {
        subjects: m.subjects,
        raters: m.raters,
        categories: m.categories,
        p_bar_o: if all_agree { 1.0 } else { p_o },
        p_bar_e: p_e,
        kappa,
    })
}

pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64> {
    fleiss_report(m).map(|r| r.kappa)
}

/// One judge's verdict on a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
    Emotion(Emotion),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Accept => f.write_str("accept"),
            Decision::Reject => f.write_str("reject"),
            Decision::Emotion(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accept" => Ok(Decision::Accept),
            "reject" => Ok(Decision::Reject),
            other => other
                .parse::<Emotion>()
                .map(Decision::Emotion)
                .map_err(|_| Error::Rating(format!("unknown decision '{s}'"))),
        }
    }
}

/// Accept/Reject votes on emotion-specific sentences, emotion votes on
/// common sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionKind {
    AcceptReject,
    EmotionVote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeDecisionSet {
    pub recording_id: String,
    decisions: Vec<Decision>,
}

impl JudgeDecisionSet {
    pub fn new(recording_id: impl Into<String>, decisions: Vec<Decision>) -> Result<Self> {
        let recording_id = recording_id.into();
        if decisions.len() != JUDGES {
            return Err(Error::Rating(format!(
                "recording {recording_id} has {} decisions, expected {JUDGES}",
                decisions.len()
            )));
        }
        let set = Self {
            recording_id,
            decisions,
        };
        set.kind()?;
        Ok(set)
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Kind implied by the votes; `None` when every judge rejected.
    pub fn kind(&self) -> Result<Option<DecisionKind>> {
        let accepts = self.decisions.contains(&Decision::Accept);
        let emotions = self.decisions.iter().any(|d| matches!(d, Decision::Emotion(_)));
        match (accepts, emotions) {
            (true, true) => Err(Error::Rating(format!(
                "recording {} mixes accept votes with emotion votes",
                self.recording_id
            ))),
            (true, false) => Ok(Some(DecisionKind::AcceptReject)),
            (false, true) => Ok(Some(DecisionKind::EmotionVote)),
            (false, false) => Ok(None),
        }
    }

    fn count(&self, d: Decision) -> usize {
        self.decisions.iter().filter(|&&x| x == d).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted(Emotion),
    Rejected,
}

/// Admits a recording when at least five of eight judges agree.
///
/// With `intended` the set must hold Accept/Reject votes; without it the set
/// must hold emotion votes and the emotion with five or more votes wins.
pub fn acceptance_filter(d: &JudgeDecisionSet, intended: Option<Emotion>) -> Result<Verdict> {
    let kind = d.kind()?;
    match intended {
        Some(emotion) => {
            if kind == Some(DecisionKind::EmotionVote) {
                return Err(Error::Rating(format!(
                    "recording {} has emotion votes but an intended emotion was given",
                    d.recording_id
                )));
            }
            Ok(if d.count(Decision::Accept) >= ACCEPT_VOTES {
                Verdict::Accepted(emotion)
            } else {
                Verdict::Rejected
            })
        }
        None => {
            if kind == Some(DecisionKind::AcceptReject) {
                return Err(Error::Rating(format!(
                    "recording {} has accept votes but no intended emotion",
                    d.recording_id
                )));
            }
            // 5 of 8 is a strict majority, so at most one emotion qualifies.
            Ok(Emotion::ALL
                .into_iter()
                .find(|&e| d.count(Decision::Emotion(e)) >= ACCEPT_VOTES)
                .map_or(Verdict::Rejected, Verdict::Accepted))
        }
    }
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    recording_id: String,
    judge_id: u32,
    decision: String,
}

/// Reads `recording_id,judge_id,decision` rows. Every recording needs
/// exactly one row per judge 1-8. Sets come back ordered by recording id.
pub fn parse_ratings(reader: impl std::io::Read) -> Result<Vec<JudgeDecisionSet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_rec: BTreeMap<String, BTreeMap<u32, Decision>> = BTreeMap::new();
    for row in rdr.deserialize::<RatingRow>() {
        let row = row.map_err(|e| Error::Rating(e.to_string()))?;
        if !(1..=JUDGES as u32).contains(&row.judge_id) {
            return Err(Error::Rating(format!("judge id {} outside 1..={JUDGES}", row.judge_id)));
        }
        let decision: Decision = row.decision.parse()?;
        if by_rec
            .entry(row.recording_id.clone())
            .or_default()
            .insert(row.judge_id, decision)
            .is_some()
        {
            return Err(Error::Rating(format!(
                "judge {} rated recording {} twice",
                row.judge_id, row.recording_id
            )));
        }
    }
    by_rec
        .into_iter()
        .map(|(id, judges)| JudgeDecisionSet::new(id, judges.into_values().collect()))
        .collect()
}

pub fn read_ratings(path: &Path) -> Result<Vec<JudgeDecisionSet>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(file)
}

/// Kappa per decision kind plus all sets pooled.
///
/// Accept/Reject sets use two categories. Emotion sets use six: the five
/// emotions plus Reject, so every row still sums to eight. The pooled matrix
/// uses all seven decisions. Sets where every judge rejected carry no kind
/// and only enter the pooled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub accept_reject: Option<KappaReport>,
    pub emotion: Option<KappaReport>,
    pub pooled: Option<KappaReport>,
}

fn matrix_for(sets: &[&JudgeDecisionSet], categories: &[Decision]) -> Result<Option<KappaReport>> {
    if sets.is_empty() {
        return Ok(None);
    }
    let rows: Vec<Vec<u32>> = sets
        .iter()
        .map(|s| categories.iter().map(|&c| s.count(c) as u32).collect())
        .collect();
    fleiss_report(&RatingMatrix::new(&rows)?).map(Some)
}

pub fn agreement_report(sets: &[JudgeDecisionSet]) -> Result<AgreementReport> {
    let mut binary = Vec::new();
    let mut emotion = Vec::new();
    for s in sets {
        match s.kind()? {
            Some(DecisionKind::AcceptReject) => binary.push(s),
            Some(DecisionKind::EmotionVote) => emotion.push(s),
            None => {}
        }
    }
    let emotion_cats: Vec<Decision> = Emotion::ALL
        .into_iter()
        .map(Decision::Emotion)
        .chain([Decision::Reject])
        .collect();
    let pooled_cats: Vec<Decision> = [Decision::Accept]
        .into_iter()
        .chain(emotion_cats.iter().copied())
        .collect();
    let all: Vec<&JudgeDecisionSet> = sets.iter().collect();
    Ok(AgreementReport {
        accept_reject: matrix_for(&binary, &[Decision::Accept, Decision::Reject])?,
        emotion: matrix_for(&emotion, &emotion_cats)?,
        pooled: matrix_for(&all, &pooled_cats)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(decisions: &[Decision]) -> JudgeDecisionSet {
        JudgeDecisionSet::new("r", decisions.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let m = RatingMatrix::new(&[vec![2, 0], vec![1, 1]]).unwrap();
        let r = fleiss_report(&m).unwrap();
        assert_eq!(r.p_bar_o, 0.5);
        assert_eq!(r.p_bar_e, 0.625);
        assert!((r.kappa + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn complete_agreement_is_one() {
        let m = RatingMatrix::new(&[vec![8, 0, 0], vec![0, 8, 0], vec![0, 0, 8]]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
        // a single category everywhere is complete agreement, not degenerate
        let one = RatingMatrix::new(&[vec![4, 0], vec![4, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&one).unwrap(), 1.0);
    }

    #[test]
    fn invalid_matrices() {
        assert!(matches!(
            RatingMatrix::new(&[vec![2, 0], vec![1, 2]]),
            Err(Error::Rating(_))
        ));
        assert!(matches!(RatingMatrix::new(&[vec![1, 0]]), Err(Error::Rating(_))));
        assert!(matches!(RatingMatrix::new(&[]), Err(Error::Rating(_))));
    }

    #[test]
    fn report_json_uses_symbol_names() {
        let m = RatingMatrix::new(&[vec![2, 0], vec![1, 1]]).unwrap();
        let v: serde_json::Value = serde_json::to_value(fleiss_report(&m).unwrap()).unwrap();
        assert_eq!(v["N"], 2);
        assert_eq!(v["n"], 2);
        assert_eq!(v["k"], 2);
    }

    #[test]
    fn acceptance_rule() {
        use Decision::{Accept as A, Reject as R};
        let five = set(&[A, A, A, A, A, R, R, R]);
        assert_eq!(
            acceptance_filter(&five, Some(Emotion::Angry)).unwrap(),
            Verdict::Accepted(Emotion::Angry)
        );
        let four = set(&[A, A, A, A, R, R, R, R]);
        assert_eq!(
            acceptance_filter(&four, Some(Emotion::Angry)).unwrap(),
            Verdict::Rejected
        );
        let h = Decision::Emotion(Emotion::Happy);
        let s = Decision::Emotion(Emotion::Sad);
        let common = set(&[h, h, h, h, h, s, s, R]);
        assert_eq!(
            acceptance_filter(&common, None).unwrap(),
            Verdict::Accepted(Emotion::Happy)
        );
        assert!(acceptance_filter(&common, Some(Emotion::Happy)).is_err());
        assert!(acceptance_filter(&five, None).is_err());
        assert!(JudgeDecisionSet::new("m", vec![A, h, R, R, R, R, R, R]).is_err());
        assert!(JudgeDecisionSet::new("short", vec![A; 7]).is_err());
    }

    #[test]
    fn ratings_csv() {
        let mut text = String::from("recording_id,judge_id,decision\n");
        for j in 1..=8 {
            text += &format!("a5-01-01-01,{j},{}\n", if j <= 6 { "accept" } else { "reject" });
            text += &format!("n1-06-01-01,{j},neutral\n");
        }
        let sets = parse_ratings(text.as_bytes()).unwrap();
        assert_eq!(sets.len(), 2);
        let report = agreement_report(&sets).unwrap();
        assert_eq!(report.accept_reject.unwrap().categories, 2);
        assert_eq!(report.emotion.unwrap().kappa, 1.0);
        assert_eq!(report.pooled.unwrap().subjects, 2);

        let dup = "recording_id,judge_id,decision\nx,1,accept\nx,1,reject\n";
        assert!(parse_ratings(dup.as_bytes()).is_err());
        let missing = "recording_id,judge_id,decision\nx,1,accept\n";
        assert!(parse_ratings(missing.as_bytes()).is_err());
        assert!(parse_ratings("recording_id,judge_id,decision\nx,9,accept\n".as_bytes()).is_err());
    }
}
