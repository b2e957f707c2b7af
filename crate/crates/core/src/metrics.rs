//! Displacement and shape errors between predicted and reference marker
//! tracks.
//!
//! Displacements are taken relative to frame 0 of each run. Per motion, the
//! residuals of every marker in every frame `k >= 1` are pooled; shape
//! residuals are pooled over all frames. The `mean` row averages the motions
//! that are present.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::MetricsError;
use crate::imaging::EllipseFit;
use crate::markers::MarkerId;
use crate::scenario::MotionKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerObservation {
    pub id: MarkerId,
    pub center: [f64; 2],
    /// Axis-aligned bounding rectangle `(w, h)`.
    pub bounding_rect: [f64; 2],
}

impl MarkerObservation {
    pub fn from_fit(id: MarkerId, fit: &EllipseFit) -> Self {
        Self {
            id,
            center: fit.center,
            bounding_rect: fit.bounding_rect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorPair {
    pub rmse: f64,
    pub mag: f64,
}

/// Orders `b` by the ids of `a`. Both sides must hold the same unique ids.
fn pair<'a>(
    a: &'a [MarkerObservation],
    b: &'a [MarkerObservation],
) -> Result<Vec<(&'a MarkerObservation, &'a MarkerObservation)>, MetricsError> {
    let index = |side: &'a [MarkerObservation]| {
        let mut map = BTreeMap::new();
        for o in side {
            if map.insert(o.id, o).is_some() {
                return Err(MetricsError::DuplicateId(o.id));
            }
        }
        Ok(map)
    };
    let (ma, mb) = (index(a)?, index(b)?);
    let missing_in_pred: Vec<MarkerId> = mb.keys().filter(|k| !ma.contains_key(k)).copied().collect();
    let missing_in_truth: Vec<MarkerId> = ma.keys().filter(|k| !mb.contains_key(k)).copied().collect();
    if !missing_in_pred.is_empty() || !missing_in_truth.is_empty() {
        return Err(MetricsError::Pairing {
            missing_in_pred,
            missing_in_truth,
        });
    }
    Ok(ma.into_iter().map(|(id, o)| (o, mb[&id])).collect())
}

/// Per-marker displacement residuals `(d_pred − d_true, ‖d_pred‖ − ‖d_true‖)`.
fn displacement_residuals(
    pred: (&[MarkerObservation], &[MarkerObservation]),
    truth: (&[MarkerObservation], &[MarkerObservation]),
) -> Result<Vec<(MarkerId, [f64; 2], f64)>, MetricsError> {
    let d = |a: &MarkerObservation, b: &MarkerObservation| [b.center[0] - a.center[0], b.center[1] - a.center[1]];
    let p = pair(pred.0, pred.1)?;
    let t = pair(truth.0, truth.1)?;
    // the two sides must also agree with each other
    pair(pred.0, truth.0)?;
    Ok(p.iter()
        .zip(&t)
        .map(|((p0, pk), (t0, tk))| {
            let (dp, dt) = (d(p0, pk), d(t0, tk));
            let r = [dp[0] - dt[0], dp[1] - dt[1]];
            (p0.id, r, dp[0].hypot(dp[1]) - dt[0].hypot(dt[1]))
        })
        .collect())
}

/// `e_rmse` and `e_mag` for one frame pair per side, in pixels.
pub fn displacement_errors(
    pred: (&[MarkerObservation], &[MarkerObservation]),
    truth: (&[MarkerObservation], &[MarkerObservation]),
) -> Result<ErrorPair, MetricsError> {
    let res = displacement_residuals(pred, truth)?;
    if res.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = res.len() as f64;
    Ok(ErrorPair {
        rmse: (res.iter().map(|(_, r, _)| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / n).sqrt(),
        mag: res.iter().map(|(_, _, m)| m.abs()).sum::<f64>() / n,
    })
}

fn shape_residuals(pred: &[MarkerObservation], truth: &[MarkerObservation]) -> Result<Vec<(MarkerId, [f64; 2])>, MetricsError> {
    Ok(pair(pred, truth)?
        .into_iter()
        .map(|(p, t)| {
            (
                p.id,
                [p.bounding_rect[0] - t.bounding_rect[0], p.bounding_rect[1] - t.bounding_rect[1]],
            )
        })
        .collect())
}

/// Per-dimension RMSE and mean absolute difference of bounding rectangles.
pub fn shape_errors(pred: &[MarkerObservation], truth: &[MarkerObservation]) -> Result<ErrorPair, MetricsError> {
    let res = shape_residuals(pred, truth)?;
    if res.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = res.len() as f64;
    Ok(ErrorPair {
        rmse: (res.iter().map(|(_, r)| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / (2.0 * n)).sqrt(),
        mag: res.iter().map(|(_, r)| r[0].abs() + r[1].abs()).sum::<f64>() / (2.0 * n),
    })
}

/// One run: its motion label and the per-frame marker tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrack {
    pub name: String,
    pub motion: MotionKind,
    pub frames: Vec<Vec<MarkerObservation>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionMetrics {
    pub displacement: ErrorPair,
    pub shape: ErrorPair,
    /// Pooled marker-frame residuals behind the displacement errors.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub run: String,
    pub frame: usize,
    pub id: MarkerId,
    pub du: f64,
    pub dv: f64,
    pub dmag: f64,
    pub dw: f64,
    pub dh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_motion: BTreeMap<MotionKind, MotionMetrics>,
    pub mean: MotionMetrics,
    pub residuals: Vec<Residual>,
}

#[derive(Default)]
struct Pool {
    sq: f64,
    abs: f64,
    n: usize,
    shape_sq: f64,
    shape_abs: f64,
    shape_n: usize,
}

/// Compares runs pairwise (the i-th prediction against the i-th truth).
pub fn report(pred: &[RunTrack], truth: &[RunTrack]) -> Result<MetricsReport, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut pools: BTreeMap<MotionKind, Pool> = BTreeMap::new();
    let mut residuals = Vec::new();
    for (p, t) in pred.iter().zip(truth) {
        if p.frames.len() != t.frames.len() {
            return Err(MetricsError::LengthMismatch {
                pred: p.frames.len(),
                truth: t.frames.len(),
            });
        }
        if p.frames.is_empty() {
            return Err(MetricsError::Empty);
        }
        let at = |frame: usize| {
            let run = p.name.clone();
            move |e: MetricsError| MetricsError::InFrame {
                run,
                frame,
                source: Box::new(e),
            }
        };
        let pool = pools.entry(t.motion).or_default();
        for k in 0..p.frames.len() {
            let shape = shape_residuals(&p.frames[k], &t.frames[k]).map_err(at(k))?;
            let disp = if k == 0 {
                None
            } else {
                Some(displacement_residuals((&p.frames[0], &p.frames[k]), (&t.frames[0], &t.frames[k])).map_err(at(k))?)
            };
            for (i, (id, s)) in shape.iter().enumerate() {
                pool.shape_sq += s[0] * s[0] + s[1] * s[1];
                pool.shape_abs += s[0].abs() + s[1].abs();
                pool.shape_n += 2;
                let (r, m) = match &disp {
                    Some(d) => {
                        let (_, r, m) = d[i];
                        pool.sq += r[0] * r[0] + r[1] * r[1];
                        pool.abs += m.abs();
                        pool.n += 1;
                        (r, m)
                    }
                    None => ([0.0; 2], 0.0),
                };
                residuals.push(Residual {
                    run: p.name.clone(),
                    frame: k,
                    id: *id,
                    du: r[0],
                    dv: r[1],
                    dmag: m,
                    dw: s[0],
                    dh: s[1],
                });
            }
        }
    }
    let per_motion: BTreeMap<MotionKind, MotionMetrics> = pools
        .into_iter()
        .map(|(m, p)| {
            let nd = p.n.max(1) as f64;
            let ns = p.shape_n.max(1) as f64;
            let metrics = MotionMetrics {
                displacement: ErrorPair {
                    rmse: (p.sq / nd).sqrt(),
                    mag: p.abs / nd,
                },
                shape: ErrorPair {
                    rmse: (p.shape_sq / ns).sqrt(),
                    mag: p.shape_abs / ns,
                },
                samples: p.n,
            };
            (m, metrics)
        })
        .collect();
    let k = per_motion.len() as f64;
    let avg = |f: fn(&MotionMetrics) -> f64| per_motion.values().map(f).sum::<f64>() / k;
    let mean = MotionMetrics {
        displacement: ErrorPair {
            rmse: avg(|m| m.displacement.rmse),
            mag: avg(|m| m.displacement.mag),
        },
        shape: ErrorPair {
            rmse: avg(|m| m.shape.rmse),
            mag: avg(|m| m.shape.mag),
        },
        samples: per_motion.values().map(|m| m.samples).sum(),
    };
    Ok(MetricsReport {
        per_motion,
        mean,
        residuals,
    })
}

impl MetricsReport {
    /// `motion,metric,value` rows: each motion then `mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("motion,metric,value\n");
        let rows = self
            .per_motion
            .iter()
            .map(|(m, v)| (m.to_string(), v))
            .chain(std::iter::once(("mean".to_string(), &self.mean)));
        for (name, m) in rows {
            for (metric, value) in [
                ("e_rmse", m.displacement.rmse),
                ("e_mag", m.displacement.mag),
                ("shape_e_rmse", m.shape.rmse),
                ("shape_e_mag", m.shape.mag),
            ] {
                writeln!(out, "{name},{metric},{value:.6}").unwrap();
            }
        }
        out
    }

    pub fn residuals_csv(&self) -> String {
        let mut out = String::from("run,frame,row,col,du,dv,dmag,dw,dh\n");
        for r in &self.residuals {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.run, r.frame, r.id.row, r.id.col, r.du, r.dv, r.dmag, r.dw, r.dh
            )
            .unwrap();
        }
        out
    }

    /// Plain-text table laid out like the comparison tables: one column per
    /// motion and the mean.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self.per_motion.keys().map(|m| m.to_string()).collect();
        write!(out, "{:<14}{:>10}", "metric (px)", "mean").unwrap();
        for n in &names {
            write!(out, "{n:>10}").unwrap();
        }
        out.push('\n');
        let lines: [(&str, fn(&MotionMetrics) -> f64); 4] = [
            ("e_rmse", |m| m.displacement.rmse),
            ("e_mag", |m| m.displacement.mag),
            ("shape_e_rmse", |m| m.shape.rmse),
            ("shape_e_mag", |m| m.shape.mag),
        ];
        for (label, f) in lines {
            write!(out, "{label:<14}{:>10.3}", f(&self.mean)).unwrap();
            for m in self.per_motion.values() {
                write!(out, "{:>10.3}", f(m)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Header of the per-frame marker table.
pub const TABLE_HEADER: &str = "row,col,u,v,a,b,angle";

/// Renders fitted ellipses as a marker table.
pub fn write_marker_table(ids: &[MarkerId], fits: &[EllipseFit]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for (id, f) in ids.iter().zip(fits) {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            id.row, id.col, f.center[0], f.center[1], f.semi_axes[0], f.semi_axes[1], f.angle
        )
        .unwrap();
    }
    out
}

#[derive(Deserialize)]
struct TableRow {
    row: u32,
    col: u32,
    u: f64,
    v: f64,
    a: f64,
    b: f64,
    angle: f64,
}

pub fn parse_marker_table(text: &str, path: &Path) -> Result<Vec<MarkerObservation>, MetricsError> {
    let table_err = |message: String| MetricsError::Table {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| table_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != TABLE_HEADER {
        return Err(table_err(format!("expected header `{TABLE_HEADER}`, got `{}`", header.join(","))));
    }
    reader
        .deserialize::<TableRow>()
        .map(|row| {
            let r = row.map_err(|e| table_err(e.to_string()))?;
            let fit = EllipseFit::new([r.u, r.v], r.a, r.b, r.angle);
            Ok(MarkerObservation::from_fit(MarkerId::new(r.row, r.col), &fit))
        })
        .collect()
}

pub fn read_marker_table(path: &Path) -> Result<Vec<MarkerObservation>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_marker_table(&text, path)
}

#[derive(Deserialize)]
struct ManifestMotion {
    motion: MotionKind,
}

/// Loads one run directory (`manifest.json` plus `frames/*_markers.csv`) or,
/// when `dir` has no manifest, every run directory directly below it in
/// name order.
pub fn load_runs(dir: &Path) -> Result<Vec<RunTrack>, MetricsError> {
    let table_err = |path: &Path, message: String| MetricsError::Table {
        path: path.to_path_buf(),
        message,
    };
    if dir.join("manifest.json").is_file() {
        return Ok(vec![load_run(dir, dir.file_name().map_or(String::new(), |n| n.to_string_lossy().into()))?]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| table_err(dir, e.to_string()))?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(table_err(dir, "no run manifest found".into()));
    }
    subdirs
        .iter()
        .map(|d| load_run(d, d.file_name().unwrap().to_string_lossy().into()))
        .collect()
}

fn load_run(dir: &Path, name: String) -> Result<RunTrack, MetricsError> {
    let manifest_path = dir.join("manifest.json");
    let table_err = |path: &Path, message: String| MetricsError::Table {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| table_err(&manifest_path, e.to_string()))?;
    let manifest: ManifestMotion = serde_json::from_str(&text).map_err(|e| table_err(&manifest_path, e.to_string()))?;
    let frames_dir = dir.join("frames");
    let mut tables: Vec<PathBuf> = std::fs::read_dir(&frames_dir)
        .map_err(|e| table_err(&frames_dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with("_markers.csv"))
        .collect();
    tables.sort();
    let frames = tables.iter().map(|p| read_marker_table(p)).collect::<Result<_, _>>()?;
    Ok(RunTrack {
        name,
        motion: manifest.motion,
        frames,
    })
}
