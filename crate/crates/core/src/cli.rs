//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::anomaly::{
    anomaly_pipeline, pooled_pro_auc, pro_auc, AnomalyParams, GroundTruth, Normalization, ScoreMap, DEFAULT_FPR_LIMIT,
};
use crate::bse::{bse_benchmark_manifest, estimate_side, BseParams, Side};
use crate::cloud::{fmt_sig9, load_cloud, CloudFormat, PointCloud};
use crate::coupling::{couple_and_solve, plan_coupling, CouplingParams, CouplingPlan, SigmaMode};
use crate::eigensolve::{modal_lengths, solve_smallest, SolverMethod, SolverOptions, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::graph::{build_graph_with, GraphOptions, DEFAULT_K};
use crate::matching::{global_match, pointwise_report, MatchReport};
use crate::registration::{register, IcpOptions, PosePerturbation, RegistrationMode, RegistrationOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "couplap", version, about = "Coupled Laplacian eigenmaps for point cloud matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplacian eigenmaps and modal lengths of one cloud.
    Eigenmaps(EigenmapsArgs),
    /// Compare a target against one or more registered sources.
    Match(MatchArgs),
    /// Decide the side of a target bone against a labeled source.
    Bse(BseArgs),
    /// Cross-test every labeled cloud of a manifest against the others.
    BseBench(BseBenchArgs),
    /// Anomaly map of an organized scan against a defect-free reference.
    Anomaly(AnomalyArgs),
    /// Normalized area under the PRO curve of score maps.
    EvalPro(EvalProArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// Neighbors per point in the kNN graph.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Join disconnected graph components with minimal bridging edges.
    #[arg(long)]
    pub auto_connect: bool,
    /// Kernel width rule for coupled graphs: global or per-shape.
    #[arg(long, default_value = "global")]
    pub sigma_mode: SigmaMode,
    /// Relative residual tolerance of the eigensolver.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Eigensolver: auto, dense or filtered.
    #[arg(long, default_value = "auto")]
    pub solver: SolverMethod,
    /// Input cloud format; detected from the file when absent.
    #[arg(long)]
    pub format: Option<CloudFormat>,
}

impl GraphArgs {
    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            method: self.solver,
            ..Default::default()
        }
    }

    fn coupling(&self, m: usize) -> CouplingParams {
        CouplingParams {
            k: self.k,
            m,
            sigma_mode: self.sigma_mode,
            auto_connect: self.auto_connect,
            solver: self.solver_options(),
        }
    }

    fn load(&self, path: &Path) -> Result<PointCloud> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(load_cloud(path, self.format)?.named(name))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegistrationArgs {
    /// Registration of sources onto the target: none, icp or pca-icp.
    #[arg(long)]
    pub registration: Option<RegistrationMode>,
    /// Rescale the moving cloud along its principal axes first.
    #[arg(long)]
    pub anisotropic: bool,
    #[arg(long, default_value_t = 100)]
    pub icp_iters: usize,
    /// Drop this fraction of worst correspondences in every ICP step.
    #[arg(long)]
    pub icp_trim: Option<f64>,
}

impl RegistrationArgs {
    fn options(&self, default: RegistrationMode) -> RegistrationOptions {
        RegistrationOptions {
            mode: self.registration.unwrap_or(default),
            anisotropic: self.anisotropic,
            icp: IcpOptions {
                max_iters: self.icp_iters,
                trim: self.icp_trim,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EigenmapsArgs {
    pub cloud: PathBuf,
    /// Number of eigenmaps beyond the constant mode.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Fixed kernel width; the largest squared edge length when absent.
    #[arg(long)]
    pub sigma_sq: Option<f64>,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatchArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long = "source", required = true)]
    pub sources: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Fraction of target points that receive cross-connections.
    #[arg(long, default_value_t = 0.5)]
    pub l: f64,
    /// Penalization coefficient on the cross-connection Laplacian.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    /// Use the cross-connections of this plan file instead of sampling.
    #[arg(long)]
    pub plan_file: Option<PathBuf>,
    /// Score every cross-connected pair against this source instead of
    /// comparing subspaces.
    #[arg(long)]
    pub pointwise: Option<usize>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub registration: RegistrationArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BseCommon {
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 0.5)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    /// Mirror the target instead of the source.
    #[arg(long)]
    pub mirror_target: bool,
    /// Rotation noise (degrees) applied to both candidates after registration.
    #[arg(long)]
    pub perturb_rotation_deg: Option<f64>,
    /// Translation noise applied to both candidates after registration.
    #[arg(long)]
    pub perturb_translation: Option<f64>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub registration: RegistrationArgs,
}

impl BseCommon {
    fn params(&self) -> BseParams {
        let perturbation = match (self.perturb_rotation_deg, self.perturb_translation) {
            (None, None) => None,
            (r, t) => Some(PosePerturbation {
                rotation_sd_deg: r.unwrap_or(0.0),
                translation_sd: t.unwrap_or(0.0),
            }),
        };
        BseParams {
            k: self.graph.k,
            m: self.m,
            l: self.l,
            alpha: self.alpha,
            seed: self.seed,
            sigma_mode: self.graph.sigma_mode,
            mirror_target: self.mirror_target,
            registration: self.registration.options(RegistrationMode::PcaIcp),
            perturbation,
            auto_connect: self.graph.auto_connect,
            solver: self.graph.solver_options(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BseArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Side of the source: left or right.
    #[arg(long)]
    pub side: Side,
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub common: BseCommon,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BseBenchArgs {
    /// CSV of `path,side` lines.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub common: BseCommon,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnomalyArgs {
    /// Defect-free reference cloud.
    #[arg(long)]
    pub source: PathBuf,
    /// Organized scan to inspect.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    /// Height quantile below which points count as background.
    #[arg(long, default_value_t = 0.05)]
    pub z_quantile: f64,
    #[arg(long, default_value_t = 13_000)]
    pub max_points: usize,
    /// Keep the reference cloud's background.
    #[arg(long)]
    pub keep_source_background: bool,
    /// Score normalization: minmax, none, or fixed:<scale>.
    #[arg(long, default_value = "minmax", value_parser = parse_normalization)]
    pub normalization: Normalization,
    /// Image height and width; the grid extent when absent.
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub shape: Option<Vec<usize>>,
    /// Ground-truth mask to evaluate against.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FPR_LIMIT)]
    pub fpr_limit: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub registration: RegistrationArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalProArgs {
    /// Score map (CSV grid or PGM); pair each with a --gt.
    #[arg(long = "map", required = true)]
    pub maps: Vec<PathBuf>,
    /// Ground-truth mask (CSV grid or PGM), in the order of the maps.
    #[arg(long = "gt", required = true)]
    pub gts: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FPR_LIMIT)]
    pub fpr_limit: f64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_normalization(s: &str) -> std::result::Result<Normalization, String> {
    match s {
        "minmax" | "min-max" => Ok(Normalization::MinMax),
        "none" => Ok(Normalization::None),
        _ => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(v)) if v > 0.0 && v.is_finite() => Ok(Normalization::Fixed(v)),
            _ => Err(format!("expected minmax, none or fixed:<positive scale>, got '{s}'")),
        },
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a C,
    result: R,
}

fn envelope<C: Serialize, R: Serialize>(command: &'static str, config: &C, result: R) -> String {
    let env = Envelope {
        version: VERSION,
        command,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("output is serializable");
    s.push('\n');
    s
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        Ok(Self(path.to_path_buf()))
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.0.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eigenmaps(a) => cmd_eigenmaps(&a),
        Command::Match(a) => cmd_match(&a),
        Command::Bse(a) => cmd_bse(&a),
        Command::BseBench(a) => cmd_bse_bench(&a),
        Command::Anomaly(a) => cmd_anomaly(&a),
        Command::EvalPro(a) => cmd_eval_pro(&a),
    }
}

/// Machine-readable error report for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "version": VERSION,
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    })
    .to_string()
}

#[derive(Serialize)]
struct EigenmapsResult<'a> {
    n: usize,
    count: usize,
    sigma_sq: f64,
    augmented: bool,
    method: SolverMethod,
    matvecs: usize,
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
}

pub fn cmd_eigenmaps(a: &EigenmapsArgs) -> Result<()> {
    let cloud = a.graph.load(&a.cloud)?;
    let opts = GraphOptions {
        sigma_sq: a.sigma_sq,
        auto_connect: a.graph.auto_connect,
    };
    let graph = build_graph_with(&cloud, a.graph.k, &opts)?;
    let emb = solve_smallest(&graph.laplacian(), graph.degrees(), a.m + 1, &a.graph.solver_options())?;
    let lengths = modal_lengths(&cloud, &graph, &emb)?;

    let mut modal = String::from("mode,eigenvalue,modal_length\n");
    for (i, (lam, len)) in emb.eigenvalues.iter().zip(&lengths).enumerate() {
        let _ = writeln!(modal, "{i},{},{}", fmt_sig9(*lam), fmt_sig9(*len));
    }
    let result = EigenmapsResult {
        n: emb.n(),
        count: emb.count(),
        sigma_sq: graph.sigma_sq(),
        augmented: graph.is_augmented(),
        method: emb.method,
        matvecs: emb.matvecs,
        eigenvalues: &emb.eigenvalues,
        residuals: &emb.residuals,
    };
    let out = OutDir::create(&a.out)?;
    out.write("eigenmaps.csv", emb.to_csv())?;
    out.write("modal_lengths.csv", modal)?;
    out.write("eigenmaps.json", envelope("eigenmaps", a, result))
}

pub fn cmd_match(a: &MatchArgs) -> Result<()> {
    let target = a.graph.load(&a.target)?;
    let reg_opts = a.registration.options(RegistrationMode::None);
    let sources = a
        .sources
        .iter()
        .map(|p| Ok(register(&a.graph.load(p)?, &target, &reg_opts)?.cloud))
        .collect::<Result<Vec<_>>>()?;
    let lens: Vec<usize> = sources.iter().map(PointCloud::len).collect();
    let plan = match &a.plan_file {
        Some(p) => {
            let plan = CouplingPlan::load_csv(p, sources.len())?;
            plan.validate(target.len(), &lens)?;
            plan
        }
        None => plan_coupling(&target, &sources, a.l, a.seed)?.with_alpha(a.alpha),
    };
    let (_, emb) = couple_and_solve(&target, &sources, &plan, &a.graph.coupling(a.m))?;
    let mut report: MatchReport = match a.pointwise {
        Some(i) => pointwise_report(&emb, &plan, i)?,
        None => global_match(&emb, &plan)?,
    };
    report.meta.k = Some(a.graph.k);
    for c in &mut report.per_candidate {
        c.name = sources[c.source].name.clone();
    }
    let out = OutDir::create(&a.out)?;
    if a.pointwise.is_some() {
        out.write("pointwise.csv", report.to_csv())?;
    }
    out.write("plan.csv", plan.to_csv())?;
    out.write("match.json", envelope("match", a, &report))
}

pub fn cmd_bse(a: &BseArgs) -> Result<()> {
    let source = a.common.graph.load(&a.source)?;
    let target = a.common.graph.load(&a.target)?;
    let pred = estimate_side(&source, a.side, &target, &a.common.params())?;
    let out = OutDir::create(&a.out)?;
    out.write("bse.json", envelope("bse", a, &pred))
}

pub fn cmd_bse_bench(a: &BseBenchArgs) -> Result<()> {
    let report = bse_benchmark_manifest(&a.manifest, &a.common.params())?;
    let out = OutDir::create(&a.out)?;
    out.write("bse_bench.csv", report.to_csv())?;
    out.write("bse_bench.json", envelope("bse-bench", a, &report))
}

#[derive(Serialize)]
struct AnomalyOutput {
    height: usize,
    width: usize,
    scored_points: usize,
    subsample_factor: f64,
    registration_rms: Option<f64>,
    max_score: f64,
    pro_auc: Option<f64>,
    baseline_pro_auc: Option<f64>,
    params: AnomalyParams,
}

pub fn cmd_anomaly(a: &AnomalyArgs) -> Result<()> {
    let source = a.graph.load(&a.source)?;
    let target = load_cloud(&a.target, a.graph.format.or(Some(CloudFormat::OrganizedGrid)))?;
    let params = AnomalyParams {
        k: a.graph.k,
        m: a.m,
        l: a.l,
        alpha: a.alpha,
        z_quantile: a.z_quantile,
        max_points: a.max_points,
        seed: a.seed,
        sigma_mode: a.graph.sigma_mode,
        registration: a.registration.options(RegistrationMode::Icp),
        normalization: a.normalization,
        source_background: !a.keep_source_background,
        auto_connect: a.graph.auto_connect,
        solver: a.graph.solver_options(),
    };
    let gt = a.gt.as_ref().map(GroundTruth::load).transpose()?;
    let shape = match (&a.shape, &gt) {
        (Some(s), _) => Some((s[0], s[1])),
        (None, Some(g)) => Some((g.height, g.width)),
        (None, None) => None,
    };
    let res = anomaly_pipeline(&source, &target, shape, &params)?;
    let (auc, base_auc) = match &gt {
        Some(g) if !g.defect_free => (
            Some(pro_auc(&res.map, g, a.fpr_limit)?),
            Some(pro_auc(&res.baseline, g, a.fpr_limit)?),
        ),
        _ => (None, None),
    };
    let mut points = String::from("target_index,score\n");
    for (s, &idx) in res.point_scores.iter().zip(&res.scored_indices) {
        let _ = writeln!(points, "{idx},{}", fmt_sig9(s.score));
    }
    let summary = AnomalyOutput {
        height: res.map.height,
        width: res.map.width,
        scored_points: res.point_scores.len(),
        subsample_factor: res.map.subsample_factor,
        registration_rms: res.registration_rms,
        max_score: res.map.max(),
        pro_auc: auc,
        baseline_pro_auc: base_auc,
        params,
    };
    let out = OutDir::create(&a.out)?;
    out.write("score_map.csv", res.map.to_csv())?;
    out.write("score_map.pgm", res.map.to_pgm16())?;
    out.write("baseline_map.csv", res.baseline.to_csv())?;
    out.write("point_scores.csv", points)?;
    out.write("anomaly.json", envelope("anomaly", a, &summary))
}

#[derive(Serialize)]
struct ProImage {
    map: String,
    gt: String,
    defect_free: bool,
    pro_auc: Option<f64>,
}

#[derive(Serialize)]
struct ProOutput {
    images: Vec<ProImage>,
    pooled_pro_auc: f64,
    fpr_limit: f64,
}

pub fn cmd_eval_pro(a: &EvalProArgs) -> Result<()> {
    if a.maps.len() != a.gts.len() {
        return Err(Error::DimensionMismatch {
            expected: a.maps.len(),
            got: a.gts.len(),
        });
    }
    let maps = a.maps.iter().map(ScoreMap::load).collect::<Result<Vec<_>>>()?;
    let gts = a.gts.iter().map(GroundTruth::load).collect::<Result<Vec<_>>>()?;
    let mut images = Vec::with_capacity(maps.len());
    let mut csv = String::from("map,gt,pro_auc\n");
    for ((map, gt), (mp, gp)) in maps.iter().zip(&gts).zip(a.maps.iter().zip(&a.gts)) {
        let auc = if gt.defect_free { None } else { Some(pro_auc(map, gt, a.fpr_limit)?) };
        let _ = writeln!(
            csv,
            "{},{},{}",
            mp.display(),
            gp.display(),
            auc.map_or_else(String::new, fmt_sig9)
        );
        images.push(ProImage {
            map: mp.display().to_string(),
            gt: gp.display().to_string(),
            defect_free: gt.defect_free,
            pro_auc: auc,
        });
    }
    let pairs: Vec<(&ScoreMap, &GroundTruth)> = maps.iter().zip(&gts).collect();
    let pooled = pooled_pro_auc(&pairs, a.fpr_limit)?;
    let _ = writeln!(csv, "pooled,,{}", fmt_sig9(pooled));
    let out = OutDir::create(&a.out)?;
    out.write("pro.csv", csv)?;
    out.write(
        "pro.json",
        envelope(
            "eval-pro",
            a,
            ProOutput {
                images,
                pooled_pro_auc: pooled,
                fpr_limit: a.fpr_limit,
            },
        ),
    )
}
