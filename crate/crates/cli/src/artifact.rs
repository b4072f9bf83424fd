//! Fitted-artifact files: structured text (TOML) with a family tag,
//! parameter tables, and training metadata. Written by `train`, read back by
//! `eval`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use searchsim::click::{
    ClickModelParams, DbnParams, DcmParams, ImpressionKey, PbmParams, RegPbmParams, UbmParams,
    FEATURE_DIM,
};
use searchsim::querygen::{MixtureWeights, QueryLengthModel};
use searchsim::stop::StopRule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub iterations: usize,
    pub final_log_likelihood: Option<f64>,
    pub data_digest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KeyedValue {
    query: String,
    doc: String,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GammaCell {
    rank: usize,
    distance: usize,
    value: f64,
}

fn keyed(map: &BTreeMap<ImpressionKey, f64>) -> Vec<KeyedValue> {
    map.iter()
        .map(|(k, &value)| KeyedValue { query: k.query_key.clone(), doc: k.doc_key.clone(), value })
        .collect()
}

fn unkeyed(rows: Vec<KeyedValue>) -> BTreeMap<ImpressionKey, f64> {
    rows.into_iter()
        .map(|r| (ImpressionKey { query_key: r.query, doc_key: r.doc }, r.value))
        .collect()
}

/// On-disk artifact shape. The family tag selects which fields are present.
#[derive(Debug, Serialize, Deserialize)]
struct ArtifactFile {
    family: String,
    metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    default_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    default_satisfy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_scalar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<StopRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mixture: Option<MixtureWeights>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poisson_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<KeyedValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    satisfy: Option<Vec<KeyedValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_cells: Option<Vec<GammaCell>>,
}

impl ArtifactFile {
    fn empty(family: &str, metadata: Metadata) -> Self {
        Self {
            family: family.to_owned(),
            metadata,
            default_alpha: None,
            default_satisfy: None,
            gamma: None,
            gamma_scalar: None,
            lambda: None,
            weights: None,
            rule: None,
            mixture: None,
            poisson_lambda: None,
            alpha: None,
            satisfy: None,
            gamma_cells: None,
        }
    }
}

/// Everything `train` can produce.
#[derive(Debug, Clone)]
pub enum TrainedArtifact {
    Click(ClickModelParams),
    RegPbm(RegPbmParams),
    Stop(StopRule),
    QueryModel { weights: MixtureWeights, length: QueryLengthModel },
}

impl TrainedArtifact {
    pub fn family(&self) -> String {
        match self {
            TrainedArtifact::Click(p) => p.kind().name().to_owned(),
            TrainedArtifact::RegPbm(_) => "pbm-regression".into(),
            TrainedArtifact::Stop(rule) => format!("stop:{}", rule.kind().name()),
            TrainedArtifact::QueryModel { .. } => "query-model".into(),
        }
    }
}

pub fn save(path: &Path, artifact: &TrainedArtifact, metadata: Metadata) -> Result<()> {
    let mut file = ArtifactFile::empty(&artifact.family(), metadata);
    match artifact {
        TrainedArtifact::Click(ClickModelParams::Pbm(p)) => {
            file.default_alpha = Some(p.default_alpha);
            file.gamma = Some(p.gamma.clone());
            file.alpha = Some(keyed(&p.alpha));
        }
        TrainedArtifact::Click(ClickModelParams::Ubm(p)) => {
            file.default_alpha = Some(p.default_alpha);
            file.alpha = Some(keyed(&p.alpha));
            file.gamma_cells = Some(
                p.gamma
                    .iter()
                    .map(|(&(rank, distance), &value)| GammaCell { rank, distance, value })
                    .collect(),
            );
        }
        TrainedArtifact::Click(ClickModelParams::Dcm(p)) => {
            file.default_alpha = Some(p.default_alpha);
            file.lambda = Some(p.lambda_cont.clone());
            file.alpha = Some(keyed(&p.alpha));
        }
        TrainedArtifact::Click(ClickModelParams::Dbn(p)) => {
            file.default_alpha = Some(p.default_attract);
            file.default_satisfy = Some(p.default_satisfy);
            file.gamma_scalar = Some(p.gamma);
            file.alpha = Some(keyed(&p.attract));
            file.satisfy = Some(keyed(&p.satisfy));
        }
        TrainedArtifact::RegPbm(p) => {
            file.weights = Some(p.weights.to_vec());
            file.gamma = Some(p.gamma.clone());
        }
        TrainedArtifact::Stop(rule) => {
            file.rule = Some(*rule);
        }
        TrainedArtifact::QueryModel { weights, length } => {
            file.mixture = Some(*weights);
            file.poisson_lambda = Some(length.lambda());
        }
    }
    let text = toml::to_string_pretty(&file).context("serializing artifact")?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing artifact {}", path.display()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(TrainedArtifact, Metadata)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("missing artifact {}", path.display()))?;
    let file: ArtifactFile =
        toml::from_str(&text).with_context(|| format!("parsing artifact {}", path.display()))?;
    let need = |name: &str, ok: bool| {
        if ok { Ok(()) } else { bail!("artifact {} is missing field {name}", path.display()) }
    };
    let artifact = match file.family.as_str() {
        "pbm" => {
            need("alpha", file.alpha.is_some())?;
            need("gamma", file.gamma.is_some())?;
            TrainedArtifact::Click(ClickModelParams::Pbm(PbmParams {
                alpha: unkeyed(file.alpha.unwrap()),
                gamma: file.gamma.unwrap(),
                default_alpha: file.default_alpha.unwrap_or(0.5),
            }))
        }
        "ubm" => {
            need("alpha", file.alpha.is_some())?;
            need("gamma_cells", file.gamma_cells.is_some())?;
            TrainedArtifact::Click(ClickModelParams::Ubm(UbmParams {
                alpha: unkeyed(file.alpha.unwrap()),
                gamma: file
                    .gamma_cells
                    .unwrap()
                    .into_iter()
                    .map(|c| ((c.rank, c.distance), c.value))
                    .collect(),
                default_alpha: file.default_alpha.unwrap_or(0.5),
            }))
        }
        "dcm" => {
            need("alpha", file.alpha.is_some())?;
            need("lambda", file.lambda.is_some())?;
            TrainedArtifact::Click(ClickModelParams::Dcm(DcmParams {
                alpha: unkeyed(file.alpha.unwrap()),
                lambda_cont: file.lambda.unwrap(),
                default_alpha: file.default_alpha.unwrap_or(0.5),
            }))
        }
        "dbn" => {
            need("alpha", file.alpha.is_some())?;
            need("satisfy", file.satisfy.is_some())?;
            need("gamma_scalar", file.gamma_scalar.is_some())?;
            TrainedArtifact::Click(ClickModelParams::Dbn(DbnParams {
                attract: unkeyed(file.alpha.unwrap()),
                satisfy: unkeyed(file.satisfy.unwrap()),
                gamma: file.gamma_scalar.unwrap(),
                default_attract: file.default_alpha.unwrap_or(0.5),
                default_satisfy: file.default_satisfy.unwrap_or(0.5),
            }))
        }
        "pbm-regression" => {
            need("weights", file.weights.is_some())?;
            need("gamma", file.gamma.is_some())?;
            let w = file.weights.unwrap();
            if w.len() != FEATURE_DIM {
                bail!("artifact {} has {} weights, expected {FEATURE_DIM}", path.display(), w.len());
            }
            let mut weights = [0.0; FEATURE_DIM];
            weights.copy_from_slice(&w);
            TrainedArtifact::RegPbm(RegPbmParams { weights, gamma: file.gamma.unwrap() })
        }
        f if f.starts_with("stop:") => {
            need("rule", file.rule.is_some())?;
            TrainedArtifact::Stop(file.rule.unwrap())
        }
        "query-model" => {
            need("mixture", file.mixture.is_some())?;
            need("poisson_lambda", file.poisson_lambda.is_some())?;
            TrainedArtifact::QueryModel {
                weights: file.mixture.unwrap(),
                length: QueryLengthModel::new(file.poisson_lambda.unwrap())?,
            }
        }
        other => bail!("artifact {} has unknown family {other:?}", path.display()),
    };
    Ok((artifact, file.metadata))
}

/// Hex sha256 of a file's bytes, for provenance lines in reports.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_artifact_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pbm.toml");
        let mut alpha = BTreeMap::new();
        alpha.insert(ImpressionKey { query_key: "q".into(), doc_key: "http://d".into() }, 0.7);
        let params = ClickModelParams::Pbm(PbmParams { alpha, gamma: vec![0.9, 0.4], default_alpha: 0.55 });
        let meta = Metadata { iterations: 12, final_log_likelihood: Some(-3.5), data_digest: "abc".into() };
        save(&path, &TrainedArtifact::Click(params.clone()), meta).unwrap();

        let (loaded, meta) = load(&path).unwrap();
        assert_eq!(meta.iterations, 12);
        match loaded {
            TrainedArtifact::Click(p) => assert_eq!(p, params),
            other => panic!("wrong artifact {other:?}"),
        }
    }

    #[test]
    fn stop_artifact_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.toml");
        let rule = StopRule::Combined { tolerance: 3, target: 2 };
        let meta = Metadata { iterations: 0, final_log_likelihood: None, data_digest: "d".into() };
        save(&path, &TrainedArtifact::Stop(rule), meta).unwrap();
        match load(&path).unwrap().0 {
            TrainedArtifact::Stop(r) => assert_eq!(r, rule),
            other => panic!("wrong artifact {other:?}"),
        }
    }

    #[test]
    fn missing_artifact_is_a_named_error() {
        let err = load(Path::new("/nonexistent/artifact.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/artifact.toml"));
    }
}
