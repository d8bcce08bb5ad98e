use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::vocab::{build_vocab, split_words, tokenize, TokenId, Vocabulary};
use super::LangError;
use crate::world::{HouseMap, RegionKind};

/// Houses by name.
pub type Houses = BTreeMap<String, HouseMap>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
}

/// A natural-language instruction plus the annotations used only for
/// reward and evaluation (start region, ordered waypoints).
#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub house: String,
    pub text: String,
    pub tokens: Arc<Vec<TokenId>>,
    pub start_region: String,
    /// Ordered region names; the last is the goal.
    pub waypoints: Vec<String>,
    pub split: Split,
}

impl Instruction {
    pub fn goal(&self) -> &str {
        self.waypoints.last().map(String::as_str).unwrap_or("")
    }
}

/// One JSON-lines record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub house: String,
    pub start_region: String,
    pub goal_region: String,
    pub waypoints: Vec<String>,
    pub text: String,
    pub split: Split,
}

impl From<&Instruction> for InstructionRecord {
    fn from(i: &Instruction) -> Self {
        Self {
            house: i.house.clone(),
            start_region: i.start_region.clone(),
            goal_region: i.goal().to_string(),
            waypoints: i.waypoints.clone(),
            text: i.text.clone(),
            split: i.split,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstructionDataset {
    vocabulary: Vocabulary,
    instructions: Vec<Instruction>,
    houses: Vec<String>,
}

impl InstructionDataset {
    /// Builds the vocabulary from the train split (from every record when
    /// there is no train split) and re-tokenizes all instructions with it.
    pub fn new(mut instructions: Vec<Instruction>) -> Self {
        let has_train = instructions.iter().any(|i| i.split == Split::Train);
        let corpus: Vec<&str> = instructions
            .iter()
            .filter(|i| !has_train || i.split == Split::Train)
            .map(|i| i.text.as_str())
            .collect();
        let vocabulary = build_vocab(&corpus);
        for i in instructions.iter_mut() {
            i.tokens = Arc::new(tokenize(&i.text, &vocabulary));
        }
        let houses: BTreeSet<String> = instructions.iter().map(|i| i.house.clone()).collect();
        Self { vocabulary, instructions, houses: houses.into_iter().collect() }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn houses(&self) -> &[String] {
        &self.houses
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Indices of instructions in `split`.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.instructions.len()).filter(|&i| self.instructions[i].split == split).collect()
    }

    /// Checks every record against the referenced houses, collecting all
    /// offenders into one error.
    pub fn validate(&self, houses: &Houses) -> Result<(), LangError> {
        let mut problems = Vec::new();
        let has_train = self.instructions.iter().any(|i| i.split == Split::Train);
        for (n, ins) in self.instructions.iter().enumerate() {
            let tag = format!("record {} ({:?})", n + 1, truncate(&ins.text));
            let Some(house) = houses.get(&ins.house) else {
                problems.push(format!("{tag}: unknown house `{}`", ins.house));
                continue;
            };
            match house.region(&ins.start_region) {
                None => problems.push(format!("{tag}: unknown start region `{}`", ins.start_region)),
                Some(r) if r.kind != RegionKind::Room => {
                    problems.push(format!("{tag}: start region `{}` is not walkable", ins.start_region))
                }
                _ => {}
            }
            if ins.waypoints.is_empty() {
                problems.push(format!("{tag}: no waypoints"));
            }
            let unique: BTreeSet<&String> = ins.waypoints.iter().collect();
            if unique.len() != ins.waypoints.len() {
                problems.push(format!("{tag}: repeated waypoint"));
            }
            for w in &ins.waypoints {
                if house.region(w).is_none() {
                    problems.push(format!("{tag}: unknown waypoint region `{w}`"));
                }
            }
            if has_train && ins.split == Split::Holdout {
                let unseen: Vec<String> = split_words(&ins.text).into_iter().filter(|w| !self.vocabulary.contains(w)).collect();
                if !unseen.is_empty() {
                    problems.push(format!("{tag}: hold-out words absent from train split: {}", unseen.join(" ")));
                }
            }
            if ins.tokens.iter().any(|&t| self.vocabulary.token(t).is_none()) {
                problems.push(format!("{tag}: undecodable token ids"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(LangError::Validation(problems))
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            out.push_str(&serde_json::to_string(&InstructionRecord::from(ins)).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON-lines without house validation.
    pub fn from_jsonl(text: &str) -> Result<Self, LangError> {
        let mut instructions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: InstructionRecord =
                serde_json::from_str(line).map_err(|e| LangError::Parse { line: n + 1, msg: e.to_string() })?;
            if rec.waypoints.last() != Some(&rec.goal_region) {
                return Err(LangError::Parse {
                    line: n + 1,
                    msg: format!("goal_region `{}` is not the last waypoint", rec.goal_region),
                });
            }
            instructions.push(Instruction {
                house: rec.house,
                text: rec.text,
                tokens: Arc::new(Vec::new()),
                start_region: rec.start_region,
                waypoints: rec.waypoints,
                split: rec.split,
            });
        }
        Ok(Self::new(instructions))
    }

    pub fn save(&self, path: &Path) -> Result<(), LangError> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| LangError::Io(format!("{}: {e}", path.display())))
    }

    /// Loads and validates against `houses`.
    pub fn load(path: &Path, houses: &Houses) -> Result<Self, LangError> {
        let text = std::fs::read_to_string(path).map_err(|e| LangError::Io(format!("{}: {e}", path.display())))?;
        let ds = Self::from_jsonl(&text)?;
        ds.validate(houses)?;
        Ok(ds)
    }
}

fn truncate(s: &str) -> String {
    if s.chars().count() > 40 {
        format!("{}...", s.chars().take(40).collect::<String>())
    } else {
        s.to_string()
    }
}
