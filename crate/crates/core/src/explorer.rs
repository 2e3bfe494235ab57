//! Request handlers behind the interactive blend explorer, independent of
//! the HTTP layer.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::blend::{interpolate, latent_mean, Interpolation};
use crate::corpus::{Segment, SegmentArchive};
use crate::embedding::{decode_tensor, EmbeddingTable};
use crate::error::Result;
use crate::metrics::{metric_vector, MetricTileSets, MetricVector};
use crate::playability::{evaluate_segment, Agents, Category, SearchBudget, Verdict};
use crate::seed::rng_for;
use crate::tiles::TileCatalog;
use crate::vae::{normal_matrix, VaeModel};

pub const API_VERSION: u32 = 1;
pub const DEFAULT_SEARCH_BUDGET: Duration = Duration::from_millis(250);

/// Immutable state shared by all requests.
pub struct Session {
    pub model: VaeModel,
    pub table: EmbeddingTable,
    pub catalog: TileCatalog,
    pub sets: MetricTileSets,
    pub agents: Agents,
    pub search_budget: Duration,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub version: u32,
    pub error: String,
}

impl ApiError {
    pub fn new(status: u16, error: impl Into<String>) -> Self {
        Self {
            status,
            version: API_VERSION,
            error: error.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub id: String,
    pub game: String,
    pub tiles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentList {
    pub version: u32,
    pub segments: Vec<SegmentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Debug {
    pub latent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPayload {
    pub version: u32,
    pub tiles: Vec<String>,
    pub metric_vector: MetricVector,
    pub lr_playable: Verdict,
    pub loz_playable: Verdict,
    pub category: Category,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub debug: Debug,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BlendRequest {
    pub a: String,
    pub b: String,
    pub t: f64,
}

impl Session {
    pub fn new(model: VaeModel, table: EmbeddingTable, archive: &SegmentArchive, catalog: TileCatalog) -> Result<Self> {
        Ok(Self {
            model,
            table,
            catalog,
            sets: MetricTileSets::default(),
            agents: Agents::default(),
            search_budget: DEFAULT_SEARCH_BUDGET,
            segments: archive.segments()?,
        })
    }

    pub fn list_segments(&self, filter: Option<&str>) -> Result<SegmentList, ApiError> {
        let game = match filter {
            None | Some("all") | Some("") => None,
            Some(g) if self.catalog.has_game(g) => Some(g),
            Some(g) => return Err(ApiError::new(400, format!("unknown game filter {g:?}"))),
        };
        let segments = self
            .segments
            .iter()
            .filter(|s| game.is_none_or(|g| s.provenance.game == g))
            .map(|s| SegmentSummary {
                id: s.id(),
                game: s.provenance.game.clone(),
                tiles: s.to_lines(),
            })
            .collect();
        Ok(SegmentList {
            version: API_VERSION,
            segments,
        })
    }

    fn find(&self, id: &str) -> Result<&Segment, ApiError> {
        self.segments
            .iter()
            .find(|s| s.id() == id)
            .ok_or_else(|| ApiError::new(404, format!("unknown segment {id:?}")))
    }

    fn evaluate(&self, latent: Vec<f64>) -> Result<EvalPayload, ApiError> {
        let internal = |e: crate::Error| ApiError::new(500, e.to_string());
        let segment = decode_tensor(&self.model.decode(&latent).map_err(internal)?, &self.table).map_err(internal)?;
        let mut budget = SearchBudget::with_deadline(Instant::now() + self.search_budget);
        let verdict = evaluate_segment(&segment, &self.catalog, &self.agents, &mut budget);
        Ok(EvalPayload {
            version: API_VERSION,
            tiles: segment.to_lines(),
            metric_vector: metric_vector(&segment, &self.sets),
            lr_playable: verdict.lr,
            loz_playable: verdict.loz,
            category: verdict.category,
            t: None,
            seed: None,
            debug: Debug { latent },
        })
    }

    pub fn blend(&self, req: &BlendRequest) -> Result<EvalPayload, ApiError> {
        let a = self.find(&req.a)?;
        let b = self.find(&req.b)?;
        if !(0.0..=1.0).contains(&req.t) {
            return Err(ApiError::new(422, format!("t = {} is outside [0, 1]", req.t)));
        }
        let internal = |e: crate::Error| ApiError::new(500, e.to_string());
        let mu_a = latent_mean(&self.model, &self.table, a).map_err(internal)?;
        let mu_b = latent_mean(&self.model, &self.table, b).map_err(internal)?;
        let mut payload = self.evaluate(interpolate(&mu_a, &mu_b, req.t, Interpolation::Linear))?;
        payload.t = Some(req.t);
        Ok(payload)
    }

    /// Decodes a prior sample; without a seed one is drawn and echoed.
    pub fn random(&self, seed: Option<u64>) -> Result<EvalPayload, ApiError> {
        let seed = seed.unwrap_or_else(|| rand::random::<u32>() as u64);
        let z = normal_matrix(1, self.model.latent_dim(), &mut rng_for(seed, "explorer-random"));
        let mut payload = self.evaluate(z.row(0).to_vec())?;
        payload.seed = Some(seed);
        Ok(payload)
    }

    pub fn health(&self) -> serde_json::Value {
        serde_json::json!({
            "version": API_VERSION,
            "status": "ok",
            "segments": self.segments.len(),
            "latent_dim": self.model.latent_dim(),
        })
    }
}
