//! Newline-delimited JSON messages exchanged with trainer workers.
//!
//! Request:
//! `{"id": str, "genome": <genome JSON>, "dataset": str, "train": {...}}`
//!
//! Response:
//! `{"id": str, "status": "ok"|"error", "fitness": float?, "test_accuracy": float?,
//!   "epochs_run": int?, "wall_seconds": float?, "message": str?}`

use serde::{Deserialize, Serialize};

use crate::genome::Genome;

/// Training protocol sent with every request. Defaults: 100 epochs, batch 256,
/// learning rate 1e-4 decayed by 0.99 per epoch, 10% validation split, augmentation on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub max_epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub lr_decay_per_epoch: f64,
    pub validation_fraction: f64,
    pub augment: bool,
    /// Number of training examples to use; 0 means all of them.
    pub train_subset: u64,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            max_epochs: 100,
            batch_size: 256,
            learning_rate: 0.0001,
            lr_decay_per_epoch: 0.99,
            validation_fraction: 0.1,
            augment: true,
            train_subset: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRequest {
    pub id: String,
    pub genome: Genome,
    pub dataset: String,
    pub train: TrainSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub id: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_run: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl EvaluationResult {
    pub fn ok(id: impl Into<String>, fitness: f64) -> Self {
        EvaluationResult {
            id: id.into(),
            status: Status::Ok,
            fitness: Some(fitness),
            test_accuracy: None,
            epochs_run: None,
            wall_seconds: None,
            message: None,
        }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        EvaluationResult {
            id: id.into(),
            status: Status::Error,
            fitness: None,
            test_accuracy: None,
            epochs_run: None,
            wall_seconds: None,
            message: Some(message.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Fitness the engine records: the reported value for ok results, 0 otherwise.
    pub fn effective_fitness(&self) -> f64 {
        match (self.status, self.fitness) {
            (Status::Ok, Some(f)) => f,
            _ => 0.0,
        }
    }

    /// Schema rules beyond what serde enforces.
    pub fn check(&self) -> Result<(), String> {
        if self.status == Status::Ok {
            match self.fitness {
                None => return Err("ok response without fitness".into()),
                Some(f) if !(0.0..=1.0).contains(&f) => {
                    return Err(format!("fitness {f} outside [0, 1]"));
                }
                Some(_) => {}
            }
        }
        if let Some(t) = self.test_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("test_accuracy {t} outside [0, 1]"));
            }
        }
        if let Some(w) = self.wall_seconds {
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("wall_seconds {w} is not a non-negative number"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::minimal_genome;

    #[test]
    fn request_wire_shape() {
        let req = EvaluationRequest {
            id: "r1".into(),
            genome: minimal_genome(10),
            dataset: "mnist".into(),
            train: TrainSettings::default(),
        };
        let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
        assert_eq!(v["id"], "r1");
        assert_eq!(v["dataset"], "mnist");
        assert_eq!(v["genome"]["fc_blocks"][1]["activation"], 5);
        assert_eq!(
            v["train"],
            serde_json::json!({
                "max_epochs": 100, "batch_size": 256, "learning_rate": 0.0001,
                "lr_decay_per_epoch": 0.99, "validation_fraction": 0.1, "augment": true,
                "train_subset": 0, "seed": 0
            })
        );
        let back: EvaluationRequest = serde_json::from_value(v).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn response_parsing_and_checks() {
        let r: EvaluationResult =
            serde_json::from_str(r#"{"id":"a","status":"ok","fitness":0.93,"epochs_run":3,"wall_seconds":1.5}"#).unwrap();
        assert!(r.check().is_ok());
        assert_eq!(r.effective_fitness(), 0.93);

        let e: EvaluationResult =
            serde_json::from_str(r#"{"id":"b","status":"error","message":"spatial size collapsed"}"#).unwrap();
        assert!(e.check().is_ok());
        assert_eq!(e.effective_fitness(), 0.0);
        assert_eq!(e.message.as_deref(), Some("spatial size collapsed"));

        let missing: EvaluationResult = serde_json::from_str(r#"{"id":"c","status":"ok"}"#).unwrap();
        assert!(missing.check().is_err());
        let high: EvaluationResult = serde_json::from_str(r#"{"id":"c","status":"ok","fitness":1.2}"#).unwrap();
        assert!(high.check().is_err());
        assert!(serde_json::from_str::<EvaluationResult>(r#"{"id":"c","status":"maybe"}"#).is_err());
    }

    #[test]
    fn error_results_omit_absent_fields() {
        let text = serde_json::to_string(&EvaluationResult::error("x", "boom")).unwrap();
        assert_eq!(text, r#"{"id":"x","status":"error","message":"boom"}"#);
    }
}
