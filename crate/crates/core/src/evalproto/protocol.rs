use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::metrics::{compute_eer, det_curve, fuse_password, rank_by_eer, score_zvs1, DetPoint};
use super::scorer::{PairScorer, ScorerKind};
use super::EvalError;
use crate::data::{make_split, Dataset, SampleKey, SplitSpec};
use crate::pairs::{PairError, PreparedSample};
use crate::signal::{prepare, DEFAULT_RATE_HZ};
use crate::util::natural_cmp;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which test-session sample of another user serves as the impostor
/// attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImpostorPick {
    /// The first repetition.
    #[default]
    First,
    /// A repetition drawn with the protocol seed.
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Z, the number of enrollment samples per character.
    pub enroll_count: usize,
    pub enroll_sessions: Vec<u32>,
    pub test_session: u32,
    /// Allows the test session to also be an enrollment session; enrollment
    /// samples are then never used as genuine attempts.
    #[serde(default)]
    pub allow_session_overlap: bool,
    pub scorer: ScorerKind,
    /// Fused password; empty means "characters ranked by EER".
    #[serde(default)]
    pub password: Vec<String>,
    pub password_lengths: Vec<usize>,
    /// Characters evaluated; empty means every label in the evaluation set.
    #[serde(default)]
    pub characters: Vec<String>,
    pub split: SplitSpec,
    pub seed: u64,
    #[serde(default)]
    pub impostor_pick: ImpostorPick,
    #[serde(default = "default_rate")]
    pub resample_rate_hz: f64,
    /// DET points per fused password length (0 = full sweep).
    #[serde(default = "default_det_points")]
    pub det_points: usize,
}

fn default_rate() -> f64 {
    DEFAULT_RATE_HZ
}

fn default_det_points() -> usize {
    50
}

impl ProtocolConfig {
    /// Z = 1 from session 1, tested on session 2, all dataset users
    /// evaluated.
    pub fn basic(scorer: ScorerKind) -> Self {
        ProtocolConfig {
            enroll_count: 1,
            enroll_sessions: vec![1],
            test_session: 2,
            allow_session_overlap: false,
            scorer,
            password: vec![],
            password_lengths: (1..=4).collect(),
            characters: vec![],
            split: SplitSpec::ById {
                dev: 0,
                eval: None,
                required_sessions: vec![],
                train_fraction: 0.8,
            },
            seed: 0,
            impostor_pick: ImpostorPick::First,
            resample_rate_hz: DEFAULT_RATE_HZ,
            det_points: 50,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.enroll_count == 0 {
            return Err(EvalError::Config("enroll_count (Z) must be >= 1".into()));
        }
        if self.enroll_sessions.is_empty() {
            return Err(EvalError::Config("no enrollment sessions".into()));
        }
        if self.enroll_sessions.contains(&self.test_session) && !self.allow_session_overlap {
            return Err(EvalError::Config(format!(
                "test session {} is also an enrollment session; set allow_session_overlap to permit it",
                self.test_session
            )));
        }
        if self.password_lengths.contains(&0) {
            return Err(EvalError::Config("password lengths must be >= 1".into()));
        }
        if !(self.resample_rate_hz > 0.0 && self.resample_rate_hz.is_finite()) {
            return Err(EvalError::Config("resample rate must be positive".into()));
        }
        Ok(())
    }
}

/// Enrollment/test session layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionScheme {
    pub enroll_sessions: Vec<u32>,
    pub test_session: u32,
}

impl SessionScheme {
    /// "1-3 vs 6" style name.
    pub fn name(&self) -> String {
        let e = &self.enroll_sessions;
        let first = e.first().copied().unwrap_or(0);
        let last = e.last().copied().unwrap_or(0);
        let contiguous = e.windows(2).all(|w| w[1] == w[0] + 1);
        let enroll = if e.len() == 1 {
            first.to_string()
        } else if contiguous {
            format!("{first}-{last}")
        } else {
            e.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
        };
        format!("{enroll} vs {}", self.test_session)
    }

    /// Applies the scheme to `cfg` with one enrollment sample per session.
    pub fn apply(&self, cfg: &ProtocolConfig) -> ProtocolConfig {
        ProtocolConfig {
            enroll_sessions: self.enroll_sessions.clone(),
            test_session: self.test_session,
            enroll_count: self.enroll_sessions.len(),
            ..cfg.clone()
        }
    }
}

/// Template update with test session `last`: enrollment grows toward the
/// test session (1, 1-2, ..., 1-(last-1)), then older sessions are removed
/// (2-(last-1), ..., (last-1)).
pub fn template_update_schemes(last: u32) -> Vec<SessionScheme> {
    let mut v = Vec::new();
    for hi in 1..last {
        v.push(SessionScheme {
            enroll_sessions: (1..=hi).collect(),
            test_session: last,
        });
    }
    for lo in 2..last {
        v.push(SessionScheme {
            enroll_sessions: (lo..last).collect(),
            test_session: last,
        });
    }
    v
}

/// Consecutive-session pairs 1 vs 2, ..., (last-1) vs last.
pub fn intra_user_schemes(last: u32) -> Vec<SessionScheme> {
    (1..last)
        .map(|s| SessionScheme {
            enroll_sessions: vec![s],
            test_session: s + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub enrolled_user: String,
    pub test_user: String,
    pub test_session: u32,
    pub test_repetition: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterResult {
    pub label: String,
    pub eer: f64,
    pub threshold: f64,
    pub genuine: Vec<ScoreRecord>,
    pub impostor: Vec<ScoreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedResult {
    pub length: usize,
    pub characters: Vec<String>,
    pub eer: f64,
    pub threshold: f64,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub det: Vec<DetPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub tool_version: String,
    pub dataset_digest: String,
    pub comparisons: usize,
    /// Mean genuine score exceeds mean impostor score.
    pub polarity_ok: bool,
}

/// Deterministic result of one protocol run. Contains no wall-clock data,
/// so identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub schema_version: u32,
    pub config: ProtocolConfig,
    pub scorer: String,
    pub eval_users: Vec<String>,
    pub characters: Vec<CharacterResult>,
    pub average_eer: f64,
    pub ranking: Vec<String>,
    pub fused: Vec<FusedResult>,
    pub metadata: ReportMetadata,
}

impl ProtocolReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, EvalError> {
        let r: ProtocolReport =
            serde_json::from_str(s).map_err(|e| EvalError::Config(format!("bad report: {e}")))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(EvalError::Config(format!(
                "unsupported report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// Flat score list: `scope,key,kind,enrolled_user,test_user,test_session,test_repetition,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scope,key,kind,enrolled_user,test_user,test_session,test_repetition,score\n",
        );
        for c in &self.characters {
            for (kind, list) in [("genuine", &c.genuine), ("impostor", &c.impostor)] {
                for r in list {
                    let _ = writeln!(
                        out,
                        "character,{},{kind},{},{},{},{},{}",
                        c.label,
                        r.enrolled_user,
                        r.test_user,
                        r.test_session,
                        r.test_repetition,
                        r.score
                    );
                }
            }
        }
        for f in &self.fused {
            for (kind, list) in [("genuine", &f.genuine), ("impostor", &f.impostor)] {
                for s in list {
                    let _ = writeln!(out, "fused,{},{kind},,,,,{s}", f.length);
                }
            }
        }
        out
    }

    pub fn character(&self, label: &str) -> Option<&CharacterResult> {
        self.characters.iter().find(|c| c.label == label)
    }

    pub fn fused_eer(&self, length: usize) -> Option<f64> {
        self.fused
            .iter()
            .find(|f| f.length == length)
            .map(|f| f.eer)
    }
}

/// Characters of a report ordered by ascending EER, ties by label.
pub fn rank_characters(report: &ProtocolReport) -> Vec<String> {
    let eers: Vec<(String, f64)> = report
        .characters
        .iter()
        .map(|c| (c.label.clone(), c.eer))
        .collect();
    rank_by_eer(&eers)
}

struct CellPlan {
    label: String,
    user: String,
    enroll: Vec<SampleKey>,
    tests: Vec<SampleKey>,
}

fn round_robin(
    ds: &Dataset,
    user: &str,
    label: &str,
    sessions: &[u32],
    z: usize,
) -> Vec<SampleKey> {
    let mut per: Vec<Vec<SampleKey>> = sessions
        .iter()
        .map(|&s| {
            ds.cell(user, label, s)
                .into_iter()
                .map(SampleKey::of)
                .collect()
        })
        .collect();
    for p in &mut per {
        p.reverse();
    }
    let mut out = Vec::new();
    while out.len() < z {
        let mut took = false;
        for p in per.iter_mut() {
            if out.len() == z {
                break;
            }
            if let Some(k) = p.pop() {
                out.push(k);
                took = true;
            }
        }
        if !took {
            break;
        }
    }
    out
}

fn seeded_index(seed: u64, user: &str, label: &str, n: usize) -> usize {
    let mut h = seed ^ 0x1BAD_5EED;
    for b in user.bytes().chain([0xff]).chain(label.bytes()) {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(h).random_range(0..n)
}

/// Genuine attempts: every test-session sample of the user against the
/// user's Z enrollment samples (mean of Z scores). Impostor attempts: one
/// test-session sample of each other evaluation user against the same
/// enrollment. Scores are pooled over users per character; fused scores sum
/// characters of the password.
pub fn run_protocol(
    ds: &Dataset,
    scorer: &dyn PairScorer,
    cfg: &ProtocolConfig,
) -> Result<ProtocolReport, EvalError> {
    cfg.validate()?;
    let split = make_split(ds, &cfg.split, cfg.seed)?;
    let users = split.eval;
    if users.len() < 2 {
        return Err(EvalError::Config(format!(
            "need at least two evaluation users, have {}",
            users.len()
        )));
    }
    let eval_ds = ds.restricted_to(&users);
    let mut characters: Vec<String> = if cfg.characters.is_empty() {
        eval_ds.labels()
    } else {
        cfg.characters.clone()
    };
    for p in &cfg.password {
        if !characters.contains(p) {
            characters.push(p.clone());
        }
    }
    characters.sort_by(|a, b| natural_cmp(a, b));
    characters.dedup();
    if characters.is_empty() {
        return Err(EvalError::Config("no characters to evaluate".into()));
    }

    let mut enroll_sessions = cfg.enroll_sessions.clone();
    enroll_sessions.sort_unstable();
    enroll_sessions.dedup();

    let mut plans = Vec::new();
    let mut impostor_key: HashMap<(&str, &str), SampleKey> = HashMap::new();
    let mut deficient: BTreeSet<String> = BTreeSet::new();
    let mut problems: Vec<String> = Vec::new();
    for label in &characters {
        for user in &users {
            let enroll = round_robin(&eval_ds, user, label, &enroll_sessions, cfg.enroll_count);
            let test_cell: Vec<SampleKey> = eval_ds
                .cell(user, label, cfg.test_session)
                .into_iter()
                .map(SampleKey::of)
                .collect();
            let tests: Vec<SampleKey> = test_cell
                .iter()
                .filter(|k| !enroll.contains(k))
                .cloned()
                .collect();
            if enroll.len() < cfg.enroll_count {
                deficient.insert(user.clone());
                problems.push(format!(
                    "{user}/{label}: {} of {} enrollment samples in sessions {:?}",
                    enroll.len(),
                    cfg.enroll_count,
                    enroll_sessions
                ));
            }
            if tests.is_empty() {
                deficient.insert(user.clone());
                problems.push(format!(
                    "{user}/{label}: no test samples in session {}",
                    cfg.test_session
                ));
            }
            if !test_cell.is_empty() {
                let pick = match cfg.impostor_pick {
                    ImpostorPick::First => 0,
                    ImpostorPick::Seeded => seeded_index(cfg.seed, user, label, test_cell.len()),
                };
                impostor_key.insert((user.as_str(), label.as_str()), test_cell[pick].clone());
            }
            plans.push(CellPlan {
                label: label.clone(),
                user: user.clone(),
                enroll,
                tests,
            });
        }
    }
    if !deficient.is_empty() {
        let mut users: Vec<String> = deficient.into_iter().collect();
        users.sort_by(|a, b| natural_cmp(a, b));
        return Err(EvalError::MissingSessions { users, problems });
    }

    let mut needed: BTreeSet<SampleKey> = BTreeSet::new();
    for p in &plans {
        needed.extend(p.enroll.iter().cloned());
        needed.extend(p.tests.iter().cloned());
    }
    needed.extend(impostor_key.values().cloned());
    let needed: Vec<SampleKey> = needed.into_iter().collect();
    let prepared: Vec<PreparedSample> = needed
        .par_iter()
        .map(|k| {
            let s = eval_ds.get(k).expect("planned keys exist");
            prepare(s, cfg.resample_rate_hz)
                .map(|tf| PreparedSample { key: k.clone(), tf })
                .map_err(|source| {
                    EvalError::Pair(PairError::Prepare {
                        key: k.clone(),
                        source,
                    })
                })
        })
        .collect::<Result<_, _>>()?;
    let by_key: HashMap<&SampleKey, &PreparedSample> =
        prepared.iter().map(|p| (&p.key, p)).collect();

    let zvs1 = |enroll: &[&PreparedSample], test: &PreparedSample| -> Result<f64, EvalError> {
        let s = enroll
            .iter()
            .map(|e| scorer.score(e, test))
            .collect::<Result<Vec<_>, _>>()?;
        score_zvs1(&s)
    };
    let record = |enrolled: &str, k: &SampleKey, score: f64| ScoreRecord {
        enrolled_user: enrolled.to_string(),
        test_user: k.user_id.clone(),
        test_session: k.session,
        test_repetition: k.repetition,
        score,
    };

    type CellScores = (Vec<ScoreRecord>, Vec<ScoreRecord>);
    let cell_scores: Vec<CellScores> = plans
        .par_iter()
        .map(|p| -> Result<CellScores, EvalError> {
            let enroll: Vec<&PreparedSample> = p.enroll.iter().map(|k| by_key[k]).collect();
            let mut gen = Vec::with_capacity(p.tests.len());
            for k in &p.tests {
                gen.push(record(&p.user, k, zvs1(&enroll, by_key[k])?));
            }
            let mut imp = Vec::with_capacity(users.len() - 1);
            for other in users.iter().filter(|u| **u != p.user) {
                let k = &impostor_key[&(other.as_str(), p.label.as_str())];
                imp.push(record(&p.user, k, zvs1(&enroll, by_key[k])?));
            }
            Ok((gen, imp))
        })
        .collect::<Result<_, _>>()?;

    let comparisons: usize = plans
        .iter()
        .zip(&cell_scores)
        .map(|(p, (g, i))| p.enroll.len() * (g.len() + i.len()))
        .sum();

    let n_users = users.len();
    let mut char_results = Vec::with_capacity(characters.len());
    let (mut sum_g, mut n_g, mut sum_i, mut n_i) = (0.0, 0usize, 0.0, 0usize);
    for (ci, label) in characters.iter().enumerate() {
        let cells = &cell_scores[ci * n_users..(ci + 1) * n_users];
        let genuine: Vec<ScoreRecord> = cells.iter().flat_map(|c| c.0.iter().cloned()).collect();
        let impostor: Vec<ScoreRecord> = cells.iter().flat_map(|c| c.1.iter().cloned()).collect();
        let g: Vec<f64> = genuine.iter().map(|r| r.score).collect();
        let i: Vec<f64> = impostor.iter().map(|r| r.score).collect();
        sum_g += g.iter().sum::<f64>();
        n_g += g.len();
        sum_i += i.iter().sum::<f64>();
        n_i += i.len();
        let e = compute_eer(&g, &i)?;
        char_results.push(CharacterResult {
            label: label.clone(),
            eer: e.eer,
            threshold: e.threshold,
            genuine,
            impostor,
        });
    }
    let polarity_ok = sum_g / n_g as f64 > sum_i / n_i as f64;
    if !polarity_ok {
        log::warn!(
            "mean genuine score does not exceed mean impostor score for {}",
            scorer.name()
        );
    }
    let average_eer = char_results.iter().map(|c| c.eer).sum::<f64>() / char_results.len() as f64;

    let mut report = ProtocolReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        scorer: scorer.name(),
        eval_users: users.clone(),
        characters: char_results,
        average_eer,
        ranking: vec![],
        fused: vec![],
        metadata: ReportMetadata {
            tool: "drawpass".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            dataset_digest: ds.provenance.content_digest.clone(),
            comparisons,
            polarity_ok,
        },
    };
    report.ranking = rank_characters(&report);

    let password = if cfg.password.is_empty() {
        report.ranking.clone()
    } else {
        cfg.password.clone()
    };
    let idx: HashMap<&str, usize> = characters
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut lengths = cfg.password_lengths.clone();
    lengths.sort_unstable();
    lengths.dedup();
    for len in lengths {
        if len > password.len() {
            log::warn!(
                "password length {len} exceeds the {} available characters",
                password.len()
            );
            continue;
        }
        let chars = &password[..len];
        let cis: Vec<usize> = chars.iter().map(|c| idx[c.as_str()]).collect();
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for u in 0..n_users {
            let cells: Vec<&CellScores> = cis
                .iter()
                .map(|&ci| &cell_scores[ci * n_users + u])
                .collect();
            let attempts = cells.iter().map(|c| c.0.len()).min().unwrap_or(0);
            for a in 0..attempts {
                let s: Vec<f64> = cells.iter().map(|c| c.0[a].score).collect();
                genuine.push(fuse_password(&s)?);
            }
            for o in 0..n_users - 1 {
                let s: Vec<f64> = cells.iter().map(|c| c.1[o].score).collect();
                impostor.push(fuse_password(&s)?);
            }
        }
        let e = compute_eer(&genuine, &impostor)?;
        let det = det_curve(&genuine, &impostor, cfg.det_points)?;
        report.fused.push(FusedResult {
            length: len,
            characters: chars.to_vec(),
            eer: e.eer,
            threshold: e.threshold,
            genuine,
            impostor,
            det,
        });
    }
    Ok(report)
}
