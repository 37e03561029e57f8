//! Versioned JSON persistence for fitted models.
//!
//! The document keeps the forecaster spec, the training tail, and the
//! family-specific fitted state. All floating-point payloads are written as
//! decimal strings (shortest round-trip form), so a save/load cycle restores
//! every parameter bit-for-bit and the file stays diffable. Trees are stored
//! as flat preorder node lists rather than nested JSON so deep trees cannot
//! hit parser recursion limits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arima::{ArimaFit, ArimaState};
use super::lstm::{Layout, LstmState};
use super::rf::{Forest, RegressionTree, RfState, TreeNode};
use super::{FamilyParams, FittedModel, ForecasterSpec, ModelState};
use crate::error::{Error, Result};
use crate::features::ExogRow;

/// Version tag written into (and required from) every model document.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    spec: ForecasterSpec,
    tail_values: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tail_exog: Vec<ExogRow>,
    state: StateDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum StateDoc {
    Naive,
    Exp {
        x_hat: String,
    },
    Wma {
        weights: Vec<String>,
    },
    Arima {
        d: usize,
        p: usize,
        intercept: String,
        ar_coefs: Vec<String>,
        exog_coefs: Vec<String>,
        sigma2: String,
        std_errors: Vec<String>,
    },
    Rf {
        lag_count: usize,
        uses_exog: bool,
        feature_count: usize,
        trees: Vec<TreeDoc>,
    },
    Lstm {
        units: usize,
        input_dim: usize,
        window: usize,
        params: Vec<String>,
        adam_m: Vec<String>,
        adam_v: Vec<String>,
        adam_t: u64,
        exog_mean: Vec<String>,
        exog_std: Vec<String>,
        value_mean: String,
        value_std: String,
        epoch_losses: Vec<String>,
    },
}

impl StateDoc {
    fn family_name(&self) -> &'static str {
        match self {
            StateDoc::Naive => "Naive",
            StateDoc::Exp { .. } => "EXP",
            StateDoc::Wma { .. } => "WMA",
            StateDoc::Arima { .. } => "ARIMA",
            StateDoc::Rf { .. } => "RF",
            StateDoc::Lstm { .. } => "LSTM",
        }
    }
}

/// One tree as its preorder node sequence (splits precede their left then
/// right subtree).
#[derive(Debug, Serialize, Deserialize)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum NodeDoc {
    Leaf {
        value: String,
    },
    Split {
        feature: usize,
        threshold: String,
    },
}

/// Shortest decimal string that parses back to exactly `v`.
fn enc(v: f64) -> String {
    format!("{v}")
}

fn enc_vec(vs: &[f64]) -> Vec<String> {
    vs.iter().map(|&v| enc(v)).collect()
}

fn dec(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::InvalidModelFile(format!("unparseable number {s:?}")))
}

fn dec_vec(ss: &[String]) -> Result<Vec<f64>> {
    ss.iter().map(|s| dec(s)).collect()
}

fn flatten_tree(node: &TreeNode, out: &mut Vec<NodeDoc>) {
    match node {
        TreeNode::Leaf { value } => out.push(NodeDoc::Leaf { value: enc(*value) }),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push(NodeDoc::Split {
                feature: *feature,
                threshold: enc(*threshold),
            });
            flatten_tree(left, out);
            flatten_tree(right, out);
        }
    }
}

fn rebuild_subtree(nodes: &[NodeDoc], cursor: &mut usize) -> Result<TreeNode> {
    let node = nodes
        .get(*cursor)
        .ok_or_else(|| Error::InvalidModelFile("truncated tree node list".into()))?;
    *cursor += 1;
    Ok(match node {
        NodeDoc::Leaf { value } => TreeNode::Leaf { value: dec(value)? },
        NodeDoc::Split { feature, threshold } => {
            let threshold = dec(threshold)?;
            let left = Box::new(rebuild_subtree(nodes, cursor)?);
            let right = Box::new(rebuild_subtree(nodes, cursor)?);
            TreeNode::Split {
                feature: *feature,
                threshold,
                left,
                right,
            }
        }
    })
}

fn rebuild_tree(doc: &TreeDoc) -> Result<RegressionTree> {
    let mut cursor = 0;
    let root = rebuild_subtree(&doc.nodes, &mut cursor)?;
    if cursor != doc.nodes.len() {
        return Err(Error::InvalidModelFile(format!(
            "tree node list has {} trailing node(s)",
            doc.nodes.len() - cursor
        )));
    }
    Ok(RegressionTree { root })
}

fn state_to_doc(state: &ModelState) -> StateDoc {
    match state {
        ModelState::Naive => StateDoc::Naive,
        ModelState::Exp { x_hat } => StateDoc::Exp { x_hat: enc(*x_hat) },
        ModelState::Wma { weights } => StateDoc::Wma {
            weights: enc_vec(weights),
        },
        ModelState::Arima(s) => StateDoc::Arima {
            d: s.d,
            p: s.p,
            intercept: enc(s.fit.intercept),
            ar_coefs: enc_vec(&s.fit.ar_coefs),
            exog_coefs: enc_vec(&s.fit.exog_coefs),
            sigma2: enc(s.fit.sigma2),
            std_errors: enc_vec(&s.fit.std_errors),
        },
        ModelState::Rf(s) => StateDoc::Rf {
            lag_count: s.lag_count,
            uses_exog: s.uses_exog,
            feature_count: s.forest.feature_count,
            trees: s
                .forest
                .trees
                .iter()
                .map(|t| {
                    let mut nodes = Vec::new();
                    flatten_tree(&t.root, &mut nodes);
                    TreeDoc { nodes }
                })
                .collect(),
        },
        ModelState::Lstm(s) => StateDoc::Lstm {
            units: s.layout.units,
            input_dim: s.layout.input_dim,
            window: s.window,
            params: enc_vec(&s.params),
            adam_m: enc_vec(&s.adam_m),
            adam_v: enc_vec(&s.adam_v),
            adam_t: s.adam_t,
            exog_mean: enc_vec(&s.exog_mean),
            exog_std: enc_vec(&s.exog_std),
            value_mean: enc(s.value_mean),
            value_std: enc(s.value_std),
            epoch_losses: enc_vec(&s.epoch_losses),
        },
    }
}

fn state_from_doc(doc: StateDoc, spec: &ForecasterSpec) -> Result<ModelState> {
    let invalid = |msg: String| Err(Error::InvalidModelFile(msg));
    match (doc, &spec.params) {
        (StateDoc::Naive, FamilyParams::Naive) => Ok(ModelState::Naive),
        (StateDoc::Exp { x_hat }, FamilyParams::Exp(_)) => Ok(ModelState::Exp {
            x_hat: dec(&x_hat)?,
        }),
        (StateDoc::Wma { weights }, FamilyParams::Wma(wp)) => {
            if weights.len() != wp.weights.len() {
                return invalid(format!(
                    "WMA state has {} weights but the spec lists {}",
                    weights.len(),
                    wp.weights.len()
                ));
            }
            Ok(ModelState::Wma {
                weights: dec_vec(&weights)?,
            })
        }
        (
            StateDoc::Arima {
                d,
                p,
                intercept,
                ar_coefs,
                exog_coefs,
                sigma2,
                std_errors,
            },
            FamilyParams::Arima(ap),
        ) => {
            if d != ap.d || p != ap.p {
                return invalid(format!(
                    "ARIMA state orders (p={p}, d={d}) do not match the spec ({}, {})",
                    ap.p, ap.d
                ));
            }
            let fit = ArimaFit {
                intercept: dec(&intercept)?,
                ar_coefs: dec_vec(&ar_coefs)?,
                exog_coefs: dec_vec(&exog_coefs)?,
                sigma2: dec(&sigma2)?,
                std_errors: dec_vec(&std_errors)?,
            };
            if fit.ar_coefs.len() != p {
                return invalid(format!(
                    "ARIMA state has {} AR coefficients for order p={p}",
                    fit.ar_coefs.len()
                ));
            }
            Ok(ModelState::Arima(ArimaState { d, p, fit }))
        }
        (
            StateDoc::Rf {
                lag_count,
                uses_exog,
                feature_count,
                trees,
            },
            FamilyParams::Rf(rp),
        ) => {
            if lag_count != rp.lag_count || uses_exog != spec.use_exogenous {
                return invalid("RF state lag/exogenous settings do not match the spec".into());
            }
            let expected_features =
                lag_count + if uses_exog { ExogRow::FEATURE_NAMES.len() } else { 0 };
            if feature_count != expected_features {
                return invalid(format!(
                    "RF state claims {feature_count} features, expected {expected_features}"
                ));
            }
            if trees.is_empty() {
                return invalid("RF state contains no trees".into());
            }
            let trees = trees.iter().map(rebuild_tree).collect::<Result<Vec<_>>>()?;
            Ok(ModelState::Rf(RfState {
                forest: Forest {
                    trees,
                    feature_count,
                },
                lag_count,
                uses_exog,
            }))
        }
        (
            StateDoc::Lstm {
                units,
                input_dim,
                window,
                params,
                adam_m,
                adam_v,
                adam_t,
                exog_mean,
                exog_std,
                value_mean,
                value_std,
                epoch_losses,
            },
            FamilyParams::Lstm(lp),
        ) => {
            let n_exog = ExogRow::FEATURE_NAMES.len();
            let expected_dim = 1 + if spec.use_exogenous { n_exog } else { 0 };
            if units != lp.units || window != lp.window || input_dim != expected_dim {
                return invalid(
                    "LSTM state dimensions do not match the spec".into(),
                );
            }
            let layout = Layout { units, input_dim };
            let total = layout.total();
            for (name, len) in [
                ("params", params.len()),
                ("adam_m", adam_m.len()),
                ("adam_v", adam_v.len()),
            ] {
                if len != total {
                    return invalid(format!(
                        "LSTM {name} has {len} entries, layout needs {total}"
                    ));
                }
            }
            let expected_stats = if spec.use_exogenous { n_exog } else { 0 };
            if exog_mean.len() != expected_stats || exog_std.len() != expected_stats {
                return invalid("LSTM covariate statistics have the wrong length".into());
            }
            Ok(ModelState::Lstm(LstmState {
                layout,
                window,
                params: dec_vec(&params)?,
                adam_m: dec_vec(&adam_m)?,
                adam_v: dec_vec(&adam_v)?,
                adam_t,
                exog_mean: dec_vec(&exog_mean)?,
                exog_std: dec_vec(&exog_std)?,
                value_mean: dec(&value_mean)?,
                value_std: dec(&value_std)?,
                epoch_losses: dec_vec(&epoch_losses)?,
            }))
        }
        (doc, _) => invalid(format!(
            "state family {} does not match spec family {}",
            doc.family_name(),
            spec.params.family_name()
        )),
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `model` to `path` as a versioned JSON document.
///
/// The write is atomic: content goes to a sibling temp file first and is
/// renamed into place, so readers never observe a half-written model.
pub fn save_model(model: &FittedModel, path: &Path) -> Result<()> {
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        spec: model.spec.clone(),
        tail_values: enc_vec(&model.tail_values),
        tail_exog: model.tail_exog.clone(),
        state: state_to_doc(&model.state),
    };
    let json = serde_json::to_string_pretty(&doc).expect("model document serializes");
    let tmp = tmp_path(path);
    fs::write(&tmp, json).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a model document written by [`save_model`].
///
/// Rejects unknown format versions and any structurally inconsistent content
/// (family mismatch, wrong parameter-vector lengths, malformed numbers).
pub fn load_model(path: &Path) -> Result<FittedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let probe: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidModelFile(format!("not valid JSON: {e}")))?;
    let version = probe
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::InvalidModelFile("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::UnsupportedFormat(version.try_into().unwrap_or(u32::MAX)));
    }
    let doc: ModelDoc =
        serde_json::from_value(probe).map_err(|e| Error::InvalidModelFile(e.to_string()))?;

    let spec = doc.spec;
    spec.validate()
        .map_err(|e| Error::InvalidModelFile(format!("invalid spec in model file: {e}")))?;
    let tail_values = dec_vec(&doc.tail_values)?;
    if tail_values.is_empty() {
        return Err(Error::InvalidModelFile("empty training tail".into()));
    }
    if spec.use_exogenous && doc.tail_exog.len() != tail_values.len() {
        return Err(Error::InvalidModelFile(format!(
            "training tail has {} values but {} covariate rows",
            tail_values.len(),
            doc.tail_exog.len()
        )));
    }
    if !spec.use_exogenous && !doc.tail_exog.is_empty() {
        return Err(Error::InvalidModelFile(
            "covariate rows present on a non-exogenous model".into(),
        ));
    }
    let state = state_from_doc(doc.state, &spec)?;
    Ok(FittedModel {
        spec,
        state,
        tail_values,
        tail_exog: doc.tail_exog,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{
        fit, ArimaParams, ExpParams, LstmParams, RfParams, WmaParams,
    };
    use super::*;
    use crate::features::build_exogenous;
    use crate::series::{Release, ReleaseCalendar, SeriesLabel, WeeklySeries};
    use crate::synth;
    use chrono::NaiveDate;
    use rand::Rng;
    use tempfile::tempdir;

    fn sample_series(n: usize, seed: u64) -> WeeklySeries {
        let noise = synth::ar_process(&[0.5, 0.2], n, 8.0, seed);
        let values: Vec<f64> = noise.iter().map(|v| 120.0 + v).collect();
        synth::counts_series(
            &values,
            NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
            SeriesLabel::Arrival,
        )
    }

    fn small_specs() -> Vec<ForecasterSpec> {
        vec![
            ForecasterSpec::new(FamilyParams::Naive),
            ForecasterSpec::new(FamilyParams::Exp(ExpParams { alpha: 0.4 })),
            ForecasterSpec::new(FamilyParams::Wma(WmaParams::default())),
            ForecasterSpec::new(FamilyParams::Arima(ArimaParams { p: 2, d: 1, q: 0 })),
            ForecasterSpec::new(FamilyParams::Rf(RfParams {
                n_trees: 10,
                lag_count: 3,
                ..RfParams::default()
            }))
            .with_seed(5),
            ForecasterSpec::new(FamilyParams::Lstm(LstmParams {
                units: 3,
                epochs: 2,
                window: 4,
                learning_rate: 1e-3,
                refit_epochs: 1,
            }))
            .with_seed(5),
        ]
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let dir = tempdir().unwrap();
        let series = sample_series(60, 21);
        for spec in small_specs() {
            let model = fit(&spec, &series, None).unwrap();
            let before = model.predict(4, None).unwrap();
            let path = dir.path().join(format!("{}.json", spec.label()));
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.spec(), &spec, "{} spec drifted", spec.label());
            assert_eq!(loaded.training_tail(), model.training_tail());
            let after = loaded.predict(4, None).unwrap();
            assert_eq!(before, after, "{} predictions drifted", spec.label());
        }
    }

    #[test]
    fn round_trip_preserves_exogenous_models() {
        let dir = tempdir().unwrap();
        let series = sample_series(80, 3);
        let releases = (0..12)
            .map(|i| Release {
                version: format!("{}.0", 30 + i),
                release_date: NaiveDate::from_ymd_opt(2015, 1, 20).unwrap()
                    + chrono::Duration::weeks(6 * i),
            })
            .collect();
        let calendar = ReleaseCalendar::new(releases);
        let exog = build_exogenous(&series, &calendar);
        let future: Vec<ExogRow> = (0..3)
            .map(|i| ExogRow {
                branch_release: (i == 1) as u8,
                week_of_month: 1 + i,
                month_of_year: 8,
                year: 2016,
            })
            .collect();

        let spec = ForecasterSpec::new(FamilyParams::Arima(ArimaParams::default()))
            .with_exogenous();
        let model = fit(&spec, &series, Some(&exog)).unwrap();
        let before = model.predict(3, Some(&future)).unwrap();
        let path = dir.path().join("arimax.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(before, loaded.predict(3, Some(&future)).unwrap());
    }

    #[test]
    fn decimal_strings_are_bit_exact() {
        let mut rng = synth::rng(99);
        let mut checked = 0;
        while checked < 1000 {
            let v = f64::from_bits(rng.gen::<u64>());
            if !v.is_finite() {
                continue;
            }
            let back = dec(&enc(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v:e} drifted");
            checked += 1;
        }
        for v in [0.0, -0.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, -f64::MAX] {
            assert_eq!(dec(&enc(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn future_format_versions_are_rejected() {
        let dir = tempdir().unwrap();
        let series = sample_series(30, 2);
        let model = fit(&ForecasterSpec::new(FamilyParams::Naive), &series, None).unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();

        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["format_version"] = serde_json::json!(2);
        fs::write(&path, doc.to_string()).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(2)), "{err}");
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");

        fs::write(&path, "definitely not json").unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            Error::InvalidModelFile(_)
        ));

        fs::write(&path, r#"{"spec": {"family": "naive"}}"#).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::InvalidModelFile(msg) if msg.contains("format_version")));
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let series = sample_series(30, 2);
        let spec = ForecasterSpec::new(FamilyParams::Exp(ExpParams::default()));
        let model = fit(&spec, &series, None).unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();

        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["spec"]["family"] = serde_json::json!("naive");
        fs::write(&path, doc.to_string()).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(
            matches!(err, Error::InvalidModelFile(msg) if msg.contains("does not match")),
        );
    }
}
