//! Synthetic problem generators, CSV ingestion and scaling.
//!
//! Generated instances are fully determined by their [`InstanceDescriptor`],
//! which serializes to JSON for exact reproduction.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{
    BilevelInstance, CompositeObjective, HalfSquaredDistance, LeastSquares, Logistic, OuterMode,
    Point, Reference, SmoothConvexFn, ZeroSmooth,
};
use crate::prox_toolkit::{ElasticNet, ZeroFn};
use crate::quasi_lipschitz::{ql_from_global_lipschitz, ql_from_lipschitz_map, ql_sum, QLConstants};
use crate::solvers::Variant;

/// Weight of the squared l2 term in the outer objective.
pub const ELASTIC_NET_L2: f64 = 0.05;

/// Noise level of the synthetic regression targets.
pub const TARGET_NOISE: f64 = 0.1;

/// A feature matrix with regression targets or `{0, 1}` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    pub features: DMatrix<f64>,
    pub targets: DVector<f64>,
    /// Whether the last feature column is the appended all-ones column.
    pub has_ones_column: bool,
    pub provenance: Option<InstanceDescriptor>,
}

impl DatasetMatrix {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(Error::Input(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        Ok(Self {
            features,
            targets,
            has_ones_column: false,
            provenance: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.ncols()
    }
}

/// Map every feature column affinely onto `[0, 1]`; constant columns become 0.
///
/// An appended ones column is left alone.
pub fn min_max_scale(data: DatasetMatrix) -> DatasetMatrix {
    let mut out = data;
    let n_scaled = out.n_cols() - usize::from(out.has_ones_column);
    for j in 0..n_scaled {
        let mut col = out.features.column_mut(j);
        let lo = col.min();
        let hi = col.max();
        let range = hi - lo;
        if range > 0.0 {
            col.apply(|v| *v = ((*v - lo) / range).clamp(0.0, 1.0));
        } else {
            col.fill(0.0);
        }
    }
    out
}

/// Append a trailing all-ones column.
pub fn append_ones(data: DatasetMatrix) -> DatasetMatrix {
    let mut out = data;
    let n = out.n_cols();
    out.features = out.features.insert_column(n, 1.0);
    out.has_ones_column = true;
    out
}

/// Read a comma-separated numeric file with a header row.
///
/// Rows and columns in parse errors are 1-based and count the header as row 1.
pub fn load_csv(path: &Path, target_column: &str) -> Result<DatasetMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let target = headers
        .iter()
        .position(|h| h.trim() == target_column)
        .ok_or_else(|| Error::Config(format!("no column named {target_column:?}")))?;
    let width = headers.len();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if j == target {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::Input("CSV has no data rows".into()));
    }
    let m = width - 1;
    let features = DMatrix::from_row_slice(n, m, &features);
    DatasetMatrix::new(features, DVector::from_vec(targets))
}

/// `|x|_1 + 0.05 |x|_2^2`.
pub fn elastic_net_outer() -> ElasticNet {
    ElasticNet::new(1.0, ELASTIC_NET_L2)
}

/// Quasi-Lipschitz constants of the elastic-net sub-gradient selector in `R^n`:
/// the sign part is `(sqrt(n), 0)`, the linear part `(0, 2 * 0.1)`.
pub fn elastic_net_ql(dim: usize) -> QLConstants {
    ql_sum(
        ql_from_global_lipschitz((dim as f64).sqrt()),
        ql_from_lipschitz_map(2.0 * ELASTIC_NET_L2, 0.0),
    )
}

fn check_sizes(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Parameter(msg.into()))
    }
}

/// Least squares on a matrix with co-linear columns.
///
/// The base block is standard normal and min-max scaled. Each extra column is
/// `A_S v` for a random set `S` of `combo_size` scaled base columns and `v`
/// uniform on `[-1, 1]^combo_size`. A ones column is appended last. Targets are
/// `A w + 0.1 e` with `w` and `e` standard normal.
pub fn make_colinear_ls(
    n_rows: usize,
    n_base_cols: usize,
    n_colinear: usize,
    combo_size: usize,
    seed: u64,
) -> Result<(DatasetMatrix, CompositeObjective)> {
    check_sizes(n_rows >= 2 && n_base_cols >= 1, "need at least 2 rows and 1 base column")?;
    check_sizes(
        n_colinear == 0 || (combo_size >= 1 && combo_size <= n_base_cols),
        "combo_size must lie in [1, n_base_cols]",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = DMatrix::from_fn(n_rows, n_base_cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scaled = min_max_scale(DatasetMatrix::new(base, DVector::zeros(n_rows))?).features;
    let mut a = scaled.clone().resize_horizontally(n_base_cols + n_colinear, 0.0);
    for j in 0..n_colinear {
        let idx = sample(&mut rng, n_base_cols, combo_size);
        let mut col = DVector::zeros(n_rows);
        for i in idx.iter() {
            let v: f64 = rng.random_range(-1.0..=1.0);
            col.axpy(v, &scaled.column(i), 1.0);
        }
        a.set_column(n_base_cols + j, &col);
    }
    let mut data = append_ones(DatasetMatrix::new(a, DVector::zeros(n_rows))?);
    let w = DVector::from_fn(data.n_cols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DVector::from_fn(n_rows, |_, _| rng.sample::<f64, _>(StandardNormal));
    data.targets = &data.features * w + noise * TARGET_NOISE;
    data.provenance = Some(InstanceDescriptor::ColinearLs {
        n_rows,
        n_base_cols,
        n_colinear,
        combo_size,
        seed,
    });
    let f = LeastSquares::new(data.features.clone(), data.targets.clone());
    Ok((data, CompositeObjective::smooth_only(Arc::new(f))))
}

/// Logistic regression on sparse count features.
///
/// Each entry is nonzero with probability `sparsity`, with a count uniform in
/// `1..=3`. Labels are Bernoulli through the sigmoid of a planted weight vector
/// with about 10% nonzero standard normal entries. The loss is the negative
/// mean log-likelihood.
pub fn make_logistic(
    n_rows: usize,
    n_cols: usize,
    sparsity: f64,
    seed: u64,
) -> Result<(DatasetMatrix, CompositeObjective)> {
    check_sizes(n_rows >= 1 && n_cols >= 1, "need at least one row and one column")?;
    check_sizes(sparsity > 0.0 && sparsity <= 1.0, "sparsity must lie in (0, 1]")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n_rows, n_cols, |_, _| {
        if rng.random_bool(sparsity) {
            rng.random_range(1..=3) as f64
        } else {
            0.0
        }
    });
    let w = DVector::from_fn(n_cols, |_, _| {
        if rng.random_bool(0.1) {
            rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    let margins = &a * w;
    let z = margins.map(|t| {
        let p = crate::problems::sigmoid(t);
        if rng.random_bool(p) {
            1.0
        } else {
            0.0
        }
    });
    let mut data = DatasetMatrix::new(a, z)?;
    data.provenance = Some(InstanceDescriptor::Logistic {
        n_rows,
        n_cols,
        sparsity,
        seed,
    });
    let f = Logistic::new(data.features.clone(), data.targets.clone());
    Ok((data, CompositeObjective::smooth_only(Arc::new(f))))
}

/// The two-dimensional instance `min 1/2 |x|^2` over `{x : x1 + x2 = 1}`,
/// written as least squares with the single row `(1, 1)`. Its solution is
/// `(0.5, 0.5)` with `phi* = 0` and `omega* = 0.25`.
///
/// Version II uses `sigma = 1/2 |.|^2`, `psi = 0`; Version I uses the same
/// function through its gradient, with quasi-Lipschitz constants `(0, 1)`.
pub fn analytic_instance(variant: Variant) -> BilevelInstance {
    let inner = CompositeObjective::smooth_only(Arc::new(LeastSquares::new(
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        DVector::from_vec(vec![1.0]),
    )));
    let outer = match variant {
        Variant::V1 => OuterMode::Subgradient {
            omega: Arc::new(ElasticNet::sq_l2(0.5)),
            ql: QLConstants { d1: 0.0, d2: 1.0 },
        },
        Variant::V2 => OuterMode::Composite {
            sigma: Arc::new(HalfSquaredDistance::origin(2, 1.0)),
            psi: Arc::new(ZeroFn),
        },
    };
    BilevelInstance::new("analytic", 2, inner, outer)
        .expect("analytic instance is well formed")
        .with_reference(Reference {
            point: Some(Point::from_vec(vec![0.5, 0.5])),
            phi: 0.0,
            omega: 0.25,
        })
}

/// The elastic-net outer objective in the requested access mode: a sub-gradient
/// selector for Version I, or `sigma = 0`, `psi = omega` for Version II.
pub fn elastic_net_outer_mode(dim: usize, variant: Variant) -> OuterMode {
    match variant {
        Variant::V1 => OuterMode::Subgradient {
            omega: Arc::new(elastic_net_outer()),
            ql: elastic_net_ql(dim),
        },
        Variant::V2 => OuterMode::Composite {
            sigma: Arc::new(ZeroSmooth) as Arc<dyn SmoothConvexFn>,
            psi: Arc::new(elastic_net_outer()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLoss {
    LeastSquares,
    Logistic,
}

/// A reproducible description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceDescriptor {
    Analytic,
    ColinearLs {
        n_rows: usize,
        n_base_cols: usize,
        n_colinear: usize,
        combo_size: usize,
        seed: u64,
    },
    Logistic {
        n_rows: usize,
        n_cols: usize,
        sparsity: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        target_column: String,
        loss: CsvLoss,
        #[serde(default = "yes")]
        scale: bool,
        #[serde(default = "yes")]
        ones_column: bool,
    },
}

fn yes() -> bool {
    true
}

impl InstanceDescriptor {
    /// Default colinear least squares: 200 rows, 50 base columns, 10 co-linear
    /// columns built from 10 base columns each.
    pub fn colinear_ls(seed: u64) -> Self {
        InstanceDescriptor::ColinearLs {
            n_rows: 200,
            n_base_cols: 50,
            n_colinear: 10,
            combo_size: 10,
            seed,
        }
    }

    /// Default logistic instance: 400 rows, 100 columns, 5% nonzeros.
    pub fn logistic(seed: u64) -> Self {
        InstanceDescriptor::Logistic {
            n_rows: 400,
            n_cols: 100,
            sparsity: 0.05,
            seed,
        }
    }

    /// Resolve an instance argument: inline JSON, a JSON file, or one of the
    /// ids `analytic`, `colinear-ls`, `logistic`.
    pub fn parse(arg: &str, seed: u64) -> Result<Self> {
        let trimmed = arg.trim();
        if trimmed.starts_with('{') {
            return Ok(serde_json::from_str(trimmed)?);
        }
        match trimmed {
            "analytic" => Ok(InstanceDescriptor::Analytic),
            "colinear-ls" | "colinear_ls" => Ok(Self::colinear_ls(seed)),
            "logistic" => Ok(Self::logistic(seed)),
            other => {
                let path = Path::new(other);
                if path.is_file() {
                    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
                } else {
                    Err(Error::Config(format!("unknown instance {other:?}")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            InstanceDescriptor::Analytic => "analytic".into(),
            InstanceDescriptor::ColinearLs { seed, .. } => format!("colinear-ls-s{seed}"),
            InstanceDescriptor::Logistic { seed, .. } => format!("logistic-s{seed}"),
            InstanceDescriptor::Csv { path, .. } => path.display().to_string(),
        }
    }

    /// Build the bi-level instance with the outer objective in the form
    /// `variant` needs, plus the data matrix for generated or loaded instances.
    pub fn build(&self, variant: Variant) -> Result<(BilevelInstance, Option<DatasetMatrix>)> {
        let (data, inner) = match self {
            InstanceDescriptor::Analytic => return Ok((analytic_instance(variant), None)),
            InstanceDescriptor::ColinearLs {
                n_rows,
                n_base_cols,
                n_colinear,
                combo_size,
                seed,
            } => make_colinear_ls(*n_rows, *n_base_cols, *n_colinear, *combo_size, *seed)?,
            InstanceDescriptor::Logistic {
                n_rows,
                n_cols,
                sparsity,
                seed,
            } => make_logistic(*n_rows, *n_cols, *sparsity, *seed)?,
            InstanceDescriptor::Csv {
                path,
                target_column,
                loss,
                scale,
                ones_column,
            } => {
                let mut data = load_csv(path, target_column)?;
                if *scale {
                    data = min_max_scale(data);
                }
                if *ones_column {
                    data = append_ones(data);
                }
                data.provenance = Some(self.clone());
                let f: Arc<dyn SmoothConvexFn> = match loss {
                    CsvLoss::LeastSquares => {
                        Arc::new(LeastSquares::new(data.features.clone(), data.targets.clone()))
                    }
                    CsvLoss::Logistic => {
                        Arc::new(Logistic::new(data.features.clone(), data.targets.clone()))
                    }
                };
                (data, CompositeObjective::smooth_only(f))
            }
        };
        let dim = data.n_cols();
        let inst = BilevelInstance::new(self.name(), dim, inner, elastic_net_outer_mode(dim, variant))?;
        Ok((inst, Some(data)))
    }
}
