//! Stage models: role language models, the utterance coder and the global
//! score regressors, trained from role-labeled transcripts.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use mifi_core::code::{BaselineCoder, CodeError, CoderConfig, GlobalExample, GlobalRegressor, GlobalsConfig};
use mifi_core::lm::{interpolate, LmError, TrainConfig};
use mifi_core::taxonomy::GroupCode;
use mifi_core::types::Role;
use mifi_core::{InterpolatedModel, NgramModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::SynthSession;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("language model: {0}")]
    Lm(#[from] LmError),
    #[error("coder: {0}")]
    Code(#[from] CodeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub lm: TrainConfig,
    /// Weight of the role's own model; the rest goes to the background
    /// model trained on both roles.
    pub in_domain_weight: f64,
    pub coder: CoderConfig,
    pub globals: GlobalsConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lm: TrainConfig::default(),
            in_domain_weight: 0.8,
            coder: CoderConfig::default(),
            globals: GlobalsConfig::default(),
        }
    }
}

/// Everything the pipeline needs after diarization, shared read-only.
#[derive(Debug, Clone)]
pub struct Models {
    pub therapist_lm: InterpolatedModel,
    pub client_lm: InterpolatedModel,
    pub coder: BaselineCoder,
    pub globals: Option<GlobalRegressor>,
}

/// Role-labeled training text.
#[derive(Debug, Clone, Default)]
pub struct TrainingData {
    pub therapist: Vec<Vec<String>>,
    pub client: Vec<Vec<String>>,
    pub coded: Vec<(Vec<String>, GroupCode)>,
    pub sessions: Vec<GlobalExample>,
}

impl TrainingData {
    pub fn from_synth(corpus: &[SynthSession]) -> Self {
        let mut d = Self::default();
        for s in corpus {
            for u in &s.utterances {
                match u.role {
                    Role::Therapist => d.therapist.push(u.tokens.clone()),
                    Role::Client => d.client.push(u.tokens.clone()),
                }
            }
            d.coded.extend(s.coder_examples());
            d.sessions.push(s.global_example());
        }
        d
    }

    pub fn role_text(&self, role: Option<Role>) -> Vec<Vec<String>> {
        match role {
            Some(Role::Therapist) => self.therapist.clone(),
            Some(Role::Client) => self.client.clone(),
            None => self.therapist.iter().chain(&self.client).cloned().collect(),
        }
    }
}

pub fn role_models(
    therapist: NgramModel,
    client: NgramModel,
    background: NgramModel,
    in_domain_weight: f64,
) -> Result<(InterpolatedModel, InterpolatedModel), LmError> {
    Ok((
        interpolate(therapist, background.clone(), in_domain_weight)?,
        interpolate(client, background, in_domain_weight)?,
    ))
}

impl Models {
    /// Global regressors are trained only when there are enough sessions.
    pub fn train(data: &TrainingData, cfg: &TrainingConfig) -> Result<Self, ModelError> {
        let t = NgramModel::train(&data.therapist, &cfg.lm)?;
        let c = NgramModel::train(&data.client, &cfg.lm)?;
        let bg = NgramModel::train(&data.role_text(None), &cfg.lm)?;
        let (therapist_lm, client_lm) = role_models(t, c, bg, cfg.in_domain_weight)?;
        let coder = BaselineCoder::train(&data.coded, &cfg.coder)?;
        let globals = if data.sessions.len() >= mifi_core::code::MIN_TRAIN_SESSIONS {
            Some(GlobalRegressor::train(&data.sessions, &cfg.globals)?)
        } else {
            None
        };
        Ok(Self {
            therapist_lm,
            client_lm,
            coder,
            globals,
        })
    }

    /// Files: `therapist.arpa`, `client.arpa`, `background.arpa`,
    /// `coder.json` and, when trained, `globals.json`.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let arpa = |name: &str, m: &NgramModel| -> Result<(), ModelError> {
            let p = dir.join(name);
            let f = fs::File::create(&p).map_err(io_err(&p))?;
            m.write_arpa(BufWriter::new(f))?;
            Ok(())
        };
        arpa("therapist.arpa", &self.therapist_lm.components[0])?;
        arpa("client.arpa", &self.client_lm.components[0])?;
        arpa("background.arpa", &self.therapist_lm.components[1])?;
        let p = dir.join("coder.json");
        fs::write(&p, self.coder.to_json()?).map_err(io_err(&p))?;
        if let Some(g) = &self.globals {
            let p = dir.join("globals.json");
            fs::write(&p, g.to_json()?).map_err(io_err(&p))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, in_domain_weight: f64) -> Result<Self, ModelError> {
        let arpa = |name: &str| -> Result<NgramModel, ModelError> {
            let p = dir.join(name);
            let f = fs::File::open(&p).map_err(io_err(&p))?;
            Ok(NgramModel::read_arpa(BufReader::new(f))?)
        };
        let (therapist_lm, client_lm) = role_models(
            arpa("therapist.arpa")?,
            arpa("client.arpa")?,
            arpa("background.arpa")?,
            in_domain_weight,
        )?;
        let p = dir.join("coder.json");
        let coder = BaselineCoder::from_json(&fs::read_to_string(&p).map_err(io_err(&p))?)?;
        let p = dir.join("globals.json");
        let globals = if p.exists() {
            Some(GlobalRegressor::from_json(&fs::read_to_string(&p).map_err(io_err(&p))?)?)
        } else {
            None
        };
        Ok(Self {
            therapist_lm,
            client_lm,
            coder,
            globals,
        })
    }
}
