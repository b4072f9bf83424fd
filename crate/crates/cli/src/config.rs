//! Run configuration: one TOML file drives a whole experiment
//! (prepare -> train -> simulate -> evaluate); individual commands read the
//! sections they need. All randomness flows from the explicit seeds here.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use searchsim::agent::{AgentConfig, PromptTemplateSet};
use searchsim::click::{ClickModelParams, DbnParams, DcmParams, PbmParams, UbmParams};
use searchsim::llm::{BackendConfig, Client, MockBackend};
use searchsim::session::Dataset;
use searchsim::stop::StopRule;
use searchsim::synth::SynthSpec;
use serde::Deserialize;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub sessions: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    #[serde(default)]
    pub exclude_tasks: Vec<String>,
    /// Apply the filtering rules after loading (default true).
    #[serde(default = "default_true")]
    pub filter: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seeds: default_seeds(), out_dir: None }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![7]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub ablate_context: bool,
    #[serde(default = "default_max_clicks")]
    pub max_clicks_per_round: usize,
    #[serde(default = "default_context_budget")]
    pub context_char_budget: usize,
    pub templates_dir: Option<PathBuf>,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            model: default_model(),
            max_rounds: default_max_rounds(),
            ablate_context: false,
            max_clicks_per_round: default_max_clicks(),
            context_char_budget: default_context_budget(),
            templates_dir: None,
        }
    }
}

fn default_model() -> String {
    "gpt-4".into()
}

fn default_max_rounds() -> usize {
    10
}

fn default_max_clicks() -> usize {
    5
}

fn default_context_budget() -> usize {
    12_000
}

impl AgentSection {
    pub fn build(&self, config_dir: &Path) -> Result<AgentConfig> {
        let templates = match &self.templates_dir {
            None => PromptTemplateSet::default(),
            Some(dir) => PromptTemplateSet::from_dir(&resolve(config_dir, dir))
                .with_context(|| format!("loading templates from {}", dir.display()))?,
        };
        Ok(AgentConfig {
            model: self.model.clone(),
            templates,
            max_rounds: self.max_rounds,
            ablate_context: self.ablate_context,
            max_clicks_per_round: self.max_clicks_per_round,
            context_char_budget: self.context_char_budget,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: BackendKind,
    /// Mock list mode: a JSON file holding an array of canned completions.
    pub script: Option<PathBuf>,
    /// Mock map mode: replay a recorded transcript.
    pub replay: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_retries: Option<u32>,
    pub backoff_base_secs: Option<f64>,
}

impl BackendSection {
    /// Builds a fresh client. Mock scripts are re-read on every call so each
    /// consumer starts from an unconsumed script.
    pub fn client(&self, config_dir: &Path) -> Result<Client> {
        match self.kind {
            BackendKind::Mock => {
                let backend = match (&self.script, &self.replay) {
                    (Some(path), _) => {
                        let path = resolve(config_dir, path);
                        let text = std::fs::read_to_string(&path)
                            .with_context(|| format!("reading mock script {}", path.display()))?;
                        let script: Vec<String> =
                            serde_json::from_str(&text).context("mock script must be a JSON array of strings")?;
                        MockBackend::from_texts(script)
                    }
                    (None, Some(path)) => {
                        let path = resolve(config_dir, path);
                        MockBackend::from_transcript(&path)
                            .with_context(|| format!("replaying transcript {}", path.display()))?
                    }
                    (None, None) => bail!("mock backend needs either `script` or `replay`"),
                };
                Ok(Client::mock(backend))
            }
            BackendKind::Remote => {
                let endpoint = self.endpoint.clone().context("remote backend needs `endpoint`")?;
                let api_key_env = self.api_key_env.clone().context("remote backend needs `api_key_env`")?;
                let cfg = BackendConfig {
                    endpoint,
                    api_key_env,
                    timeout_secs: self.timeout_secs.unwrap_or(30.0),
                    max_retries: self.max_retries.unwrap_or(3),
                    backoff_base_secs: self.backoff_base_secs.unwrap_or(0.5),
                };
                Ok(Client::remote(&cfg)?)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_subjects")]
    pub subjects: Vec<String>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default = "default_em_iters")]
    pub em_iters: usize,
    #[serde(default = "default_em_tol")]
    pub em_tol: f64,
    /// Also report corpus-level BLEU next to the averaged sentence-level
    /// default.
    #[serde(default)]
    pub corpus_bleu: bool,
    /// Grid step for mixture-weight fitting.
    #[serde(default = "default_grid_step")]
    pub weight_grid_step: f64,
    /// Fixed mixture weights; when absent they are fitted on the dataset.
    pub query_weights: Option<[f64; 4]>,
    /// Pre-fitted artifacts to evaluate (from `train`).
    #[serde(default)]
    pub artifacts: Vec<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            subjects: default_subjects(),
            folds: default_folds(),
            max_n: default_max_n(),
            em_iters: default_em_iters(),
            em_tol: default_em_tol(),
            corpus_bleu: false,
            weight_grid_step: default_grid_step(),
            query_weights: None,
            artifacts: Vec::new(),
        }
    }
}

fn default_subjects() -> Vec<String> {
    ["random-selection", "popular-selection", "pbm", "ubm", "dcm", "dbn", "pbm-regression", "fixed-depth", "frustration", "satisfaction", "combined"]
        .into_iter()
        .map(str::to_owned)
        .collect()
}

fn default_folds() -> usize {
    10
}

fn default_max_n() -> usize {
    4
}

fn default_em_iters() -> usize {
    50
}

fn default_em_tol() -> f64 {
    1e-8
}

fn default_grid_step() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_tasks: usize,
    pub n_users: usize,
    #[serde(default = "one")]
    pub sessions_per_pair: usize,
    pub max_rounds: usize,
    #[serde(default = "default_depth")]
    pub serp_depth: usize,
    #[serde(default = "two")]
    pub query_terms: usize,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    pub click_model: SynthClickModel,
    pub stop_rule: StopRule,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn default_depth() -> usize {
    10
}

/// Uniform ground-truth click behavior for the generator.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthClickModel {
    Pbm { alpha: f64, gamma: Vec<f64> },
    Ubm { alpha: f64, gamma: f64 },
    Dcm { alpha: f64, lambda: Vec<f64> },
    Dbn { attract: f64, satisfy: f64, persistence: f64 },
}

impl SynthSection {
    pub fn to_spec(&self) -> SynthSpec {
        let click_model = match &self.click_model {
            SynthClickModel::Pbm { alpha, gamma } => {
                ClickModelParams::Pbm(PbmParams::uniform(*alpha, gamma.clone()))
            }
            SynthClickModel::Ubm { alpha, gamma } => ClickModelParams::Ubm(UbmParams::uniform(*alpha, *gamma)),
            SynthClickModel::Dcm { alpha, lambda } => {
                ClickModelParams::Dcm(DcmParams::uniform(*alpha, lambda.clone()))
            }
            SynthClickModel::Dbn { attract, satisfy, persistence } => {
                ClickModelParams::Dbn(DbnParams::uniform(*attract, *satisfy, *persistence))
            }
        };
        let vocabulary = if self.vocabulary.is_empty() {
            searchsim::synth::default_vocabulary()
        } else {
            self.vocabulary.clone()
        };
        SynthSpec {
            n_tasks: self.n_tasks,
            n_users: self.n_users,
            sessions_per_pair: self.sessions_per_pair,
            max_rounds: self.max_rounds,
            serp_depth: self.serp_depth,
            query_terms: self.query_terms,
            vocabulary,
            click_model,
            stop_rule: self.stop_rule,
        }
    }
}

/// Paths inside a config file resolve relative to the config's directory.
pub fn resolve(config_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        config_dir.join(path)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_owned();
        Ok((config, dir))
    }

    /// Loads, optionally filters, and validates the configured dataset.
    pub fn load_dataset(&self, config_dir: &Path) -> Result<(Dataset, PathBuf)> {
        let sessions = self.dataset.sessions.as_ref().context("config is missing dataset.sessions")?;
        let sessions = resolve(config_dir, sessions);
        let tasks = self.dataset.tasks.as_ref().map(|p| resolve(config_dir, p));
        let loaded = searchsim::session::io::load_dataset(&sessions, tasks.as_deref())?;
        if !loaded.issues.is_empty() {
            bail!(
                "dataset has {} parse errors; run `searchsim dataset validate` for the report",
                loaded.issues.len()
            );
        }
        let dataset = if self.dataset.filter {
            let excluded: BTreeSet<String> = self.dataset.exclude_tasks.iter().cloned().collect();
            searchsim::session::filter_sessions(&loaded.dataset, &excluded).0
        } else {
            loaded.dataset
        };
        if dataset.sessions.is_empty() {
            bail!("no sessions left after loading/filtering {}", sessions.display());
        }
        Ok((dataset, sessions))
    }
}
