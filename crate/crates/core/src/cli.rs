//! Command-line front end. Every command prints one JSON document on stdout.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::builders::{self, KoszulGenerator, MeshFormat, PerturbationSpec, RNG_NAME};
use crate::cohomology::{self, BettiRoute, Endomorphism};
use crate::error::{Error, Result};
use crate::hodge;
use crate::linop::{MatrixJson, DEFAULT_RANK_TOL};
use crate::quasicomplex::{QuasiComplex, QuasiComplexJson};
use crate::reduction::{self, ReductionOptions, DEFAULT_REDUCTION_TOL};
use crate::symbolcx::{self, SampleList, SymbolComplexSample, SymbolSampleJson};

pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_CERTIFICATE_FAILURE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fredholm", version, about = "Hodge theory and reduction of finite-dimensional quasicomplexes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Relative rank tolerance: σ counts iff σ > tol · max(1, σ_max).
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Certificate threshold on output curvature.
    #[arg(long, global = true, default_value_t = DEFAULT_REDUCTION_TOL)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the command's artifact here instead of embedding it in stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature, Betti numbers and χ of a complex or quasicomplex.
    Analyze {
        /// Complex JSON; stdin when absent or `-`.
        input: Option<PathBuf>,
        /// Re-perturbation trials used to cross-check χ of a quasicomplex.
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Reduce a quasicomplex to a nearby complex.
    Reduce { input: Option<PathBuf> },
    /// Add seeded perturbations of spectral norm `eps` to every differential.
    Perturb {
        input: Option<PathBuf>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        rank_limit: Option<usize>,
    },
    /// Exactness and Laplacian checks of symbol samples.
    Symbol {
        /// Sample file: one sample, a list, or `{"samples": [...]}`.
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        generator: Option<GeneratorKind>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Simplicial de Rham complex of a closed triangulated surface.
    MeshDerham {
        /// OFF or mesh JSON; stdin when absent or `-`.
        input: Option<PathBuf>,
        /// Use the built-in periodic n × n grid instead of a file.
        #[arg(long)]
        torus_grid: Option<usize>,
        /// Format for stdin input (inferred from the extension otherwise).
        #[arg(long, value_enum)]
        mesh_format: Option<MeshFormatArg>,
    },
    /// Lefschetz number of a cochain endomorphism of an exact complex.
    Lefschetz {
        complex: PathBuf,
        /// `{"maps": [<matrix>, ...]}`, one square matrix per space.
        endomorphism: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    Koszul,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormatArg {
    Off,
    Json,
}

#[derive(Debug, Deserialize)]
struct EndomorphismJson {
    maps: Vec<MatrixJson>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SampleFile {
    One(SymbolSampleJson),
    Many(Vec<SymbolSampleJson>),
    Wrapped { samples: Vec<SymbolSampleJson> },
}

struct Input {
    text: String,
    digest: String,
}

fn read_input(path: Option<&Path>) -> Result<Input> {
    let mut bytes = Vec::new();
    match path {
        Some(p) if p != Path::new("-") => bytes = std::fs::read(p)?,
        _ => {
            std::io::stdin().read_to_end(&mut bytes)?;
        }
    }
    let hash = Sha256::digest(&bytes);
    let digest = format!("sha256:{}", hash.iter().map(|b| format!("{b:02x}")).collect::<String>());
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse(format!("input is not UTF-8: {e}")))?;
    Ok(Input { text, digest })
}

/// Outcome of one command: the stdout document and the exit code.
pub struct Outcome {
    pub document: Value,
    pub exit_code: i32,
}

struct Timer(Vec<(&'static str, Instant)>);

impl Timer {
    fn new() -> Self {
        Timer(vec![("start", Instant::now())])
    }

    fn mark(&mut self, label: &'static str) {
        self.0.push((label, Instant::now()));
    }

    fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for pair in self.0.windows(2) {
            map.insert(pair[1].0.into(), json!((pair[1].1 - pair[0].1).as_secs_f64() * 1e3));
        }
        map.insert("total".into(), json!((self.0.last().unwrap().1 - self.0[0].1).as_secs_f64() * 1e3));
        Value::Object(map)
    }
}

fn report(command: &str, global: &GlobalOpts, digest: Value, seeds: Option<Value>, results: Value, timer: &Timer) -> Value {
    let mut doc = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "input_digest": digest,
        "rank_tol": global.rank_tol,
        "tol": global.tol,
        "results": results,
        "timings_ms": timer.to_json(),
    });
    if let Some(seeds) = seeds {
        doc["seeds"] = seeds;
        doc["rng"] = json!(RNG_NAME);
    }
    doc
}

fn write_artifact(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn complex_value(v: num_complex::Complex64) -> Value {
    json!({ "re": v.re, "im": v.im })
}

fn check_options(global: &GlobalOpts) -> Result<()> {
    for (name, v) in [("--rank-tol", global.rank_tol), ("--tol", global.tol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be a positive number, got {v}")));
        }
    }
    Ok(())
}

fn analyze(global: &GlobalOpts, input: Option<&Path>, trials: usize) -> Result<Outcome> {
    let mut timer = Timer::new();
    let src = read_input(input)?;
    let qc = QuasiComplex::from_json_str(&src.text)?;
    timer.mark("load");
    let curvature = qc.validate_with(global.tol);
    let options = ReductionOptions { rank_tol: global.rank_tol, reduction_tol: global.tol };
    let mut results = json!({
        "dims": qc.dims(),
        "euler_from_dims": qc.dimension_euler(),
        "is_exact": curvature.is_exact,
        "curvature": to_value(&curvature),
    });
    let mut exit_code = 0;
    let mut seeds = None;
    if curvature.is_exact {
        let ranks = cohomology::betti(&qc, BettiRoute::RankNullity, global.rank_tol)?;
        let harmonic = cohomology::betti(&qc, BettiRoute::Harmonic, global.rank_tol)?;
        let residuals: Vec<Value> =
            hodge::hodge_all(&qc, global.rank_tol).iter().map(|h| to_value(&h.residuals)).collect();
        results["betti"] = json!(ranks.betti);
        results["harmonic_betti"] = json!(harmonic.betti);
        results["chi"] = json!(ranks.chi);
        results["hodge_residuals"] = json!(residuals);
    } else {
        let euler = cohomology::euler_quasi(&qc, trials, global.seed, options)?;
        if !euler.certified {
            exit_code = EXIT_CERTIFICATE_FAILURE;
        }
        seeds = Some(json!(euler.trial_seeds));
        results["chi"] = json!(euler.chi);
        results["euler_quasi"] = to_value(&euler);
        results["parametrix"] = to_value(&hodge::parametrix(&qc, global.rank_tol).summary());
    }
    timer.mark("compute");
    Ok(Outcome { document: report("analyze", global, json!(src.digest), seeds, results, &timer), exit_code })
}

fn reduce(global: &GlobalOpts, input: Option<&Path>) -> Result<Outcome> {
    let mut timer = Timer::new();
    let src = read_input(input)?;
    let qc = QuasiComplex::from_json_str(&src.text)?;
    timer.mark("load");
    let r = reduction::reduce_with(&qc, ReductionOptions { rank_tol: global.rank_tol, reduction_tol: global.tol })?;
    timer.mark("compute");
    let reduced = to_value(&r.reduced.to_json());
    let mut results = json!({
        "dims": qc.dims(),
        "certificate": to_value(&r.certificate()),
        "proximity_holds": r.proximity_holds(),
    });
    match &global.out {
        Some(path) => {
            write_artifact(path, &reduced)?;
            results["reduced_path"] = json!(path.display().to_string());
        }
        None => results["reduced"] = reduced,
    }
    let ok = r.certified && r.exact_output && r.proximity_holds();
    Ok(Outcome {
        document: report("reduce", global, json!(src.digest), None, results, &timer),
        exit_code: if ok { 0 } else { EXIT_CERTIFICATE_FAILURE },
    })
}

fn perturb(global: &GlobalOpts, input: Option<&Path>, eps: f64, rank_limit: Option<usize>) -> Result<Outcome> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("--eps must be finite and non-negative, got {eps}")));
    }
    let mut timer = Timer::new();
    let src = read_input(input)?;
    let qc = QuasiComplex::from_json_str(&src.text)?;
    timer.mark("load");
    let spec = PerturbationSpec { eps, rank_limit, seed: global.seed };
    let shaken = builders::perturb(&qc, &spec);
    timer.mark("compute");
    let meta = json!({
        "generated_by": "perturb",
        "eps": eps,
        "rank_limit": rank_limit,
        "seed": global.seed,
        "rng": RNG_NAME,
        "source_digest": src.digest,
    });
    let mut artifact: QuasiComplexJson = shaken.to_json();
    artifact.meta = Some(meta);
    let artifact = to_value(&artifact);
    let Some(path) = &global.out else {
        return Ok(Outcome { document: artifact, exit_code: 0 });
    };
    write_artifact(path, &artifact)?;
    let results = json!({
        "eps": eps,
        "rank_limit": rank_limit,
        "output_path": path.display().to_string(),
        "curvature": to_value(&shaken.validate_with(global.tol)),
    });
    Ok(Outcome { document: report("perturb", global, json!(src.digest), Some(json!([global.seed])), results, &timer), exit_code: 0 })
}

fn symbol(
    global: &GlobalOpts,
    input: Option<&Path>,
    generator: Option<GeneratorKind>,
    dim: usize,
    samples: usize,
) -> Result<Outcome> {
    let mut timer = Timer::new();
    let (sweep, digest, seeds) = match generator {
        Some(GeneratorKind::Koszul) => {
            let gen = KoszulGenerator::new(dim)?;
            timer.mark("load");
            let digest = json!(null);
            (symbolcx::sample_sweep(&gen, samples, global.seed, global.rank_tol)?, digest, Some(json!([global.seed])))
        }
        None => {
            let src = read_input(input)?;
            let parsed: Vec<SymbolSampleJson> = match serde_json::from_str::<SampleFile>(&src.text)? {
                SampleFile::One(s) => vec![s],
                SampleFile::Many(v) | SampleFile::Wrapped { samples: v } => v,
            };
            let list = parsed.iter().map(SymbolComplexSample::from_json).collect::<Result<Vec<_>>>()?;
            timer.mark("load");
            let n = list.len();
            let sweep = symbolcx::sample_sweep(&SampleList(list), n, 0, global.rank_tol)?;
            (sweep, json!(src.digest), None)
        }
    };
    timer.mark("compute");
    let results = to_value(&sweep);
    Ok(Outcome { document: report("symbol", global, digest, seeds, results, &timer), exit_code: 0 })
}

fn mesh_derham(
    global: &GlobalOpts,
    input: Option<&Path>,
    torus_grid: Option<usize>,
    mesh_format: Option<MeshFormatArg>,
) -> Result<Outcome> {
    let mut timer = Timer::new();
    let (mesh, digest) = match torus_grid {
        Some(n) => (builders::torus_grid(n)?, json!(format!("torus_grid:{n}"))),
        None => {
            let format = match (mesh_format, input) {
                (Some(MeshFormatArg::Off), _) => MeshFormat::Off,
                (Some(MeshFormatArg::Json), _) => MeshFormat::Json,
                (None, Some(p)) if p != Path::new("-") => MeshFormat::from_path(p)?,
                (None, _) => MeshFormat::Off,
            };
            let src = read_input(input)?;
            (builders::parse_mesh(&src.text, format)?, json!(src.digest))
        }
    };
    timer.mark("load");
    let qc = builders::derham_complex(&mesh);
    timer.mark("compute");
    let artifact = to_value(&qc.to_json());
    let Some(path) = &global.out else {
        return Ok(Outcome { document: artifact, exit_code: 0 });
    };
    write_artifact(path, &artifact)?;
    let results = json!({
        "vertices": mesh.vertices().len(),
        "edges": mesh.edges().len(),
        "faces": mesh.faces().len(),
        "dims": qc.dims(),
        "euler_from_dims": qc.dimension_euler(),
        "output_path": path.display().to_string(),
    });
    Ok(Outcome { document: report("mesh-derham", global, digest, None, results, &timer), exit_code: 0 })
}

fn lefschetz(global: &GlobalOpts, complex: &Path, endomorphism: &Path) -> Result<Outcome> {
    let mut timer = Timer::new();
    let c_src = read_input(Some(complex))?;
    let e_src = read_input(Some(endomorphism))?;
    let qc = QuasiComplex::from_json_str(&c_src.text)?;
    let maps: EndomorphismJson = serde_json::from_str(&e_src.text)?;
    let maps = maps.maps.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
    let e = Endomorphism::from_matrices(&qc, maps)?;
    timer.mark("load");
    let harmonic = cohomology::lefschetz(&qc, &e, global.rank_tol)?;
    let quotient = cohomology::lefschetz_quotient(&qc, &e, global.rank_tol)?;
    timer.mark("compute");
    let chi = cohomology::betti(&qc, BettiRoute::RankNullity, global.rank_tol)?.chi;
    let results = json!({
        "lefschetz": complex_value(harmonic.value),
        "traces": harmonic.traces.iter().copied().map(complex_value).collect::<Vec<_>>(),
        "quotient_route": complex_value(quotient.value),
        "route_difference": (harmonic.value - quotient.value).norm(),
        "commute_defect": e.commute_defect(),
        "chi": chi,
    });
    Ok(Outcome {
        document: report("lefschetz", global, json!([c_src.digest, e_src.digest]), None, results, &timer),
        exit_code: 0,
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    check_options(g)?;
    match &cli.command {
        Command::Analyze { input, trials } => analyze(g, input.as_deref(), *trials),
        Command::Reduce { input } => reduce(g, input.as_deref()),
        Command::Perturb { input, eps, rank_limit } => perturb(g, input.as_deref(), *eps, *rank_limit),
        Command::Symbol { input, generator, dim, samples } => symbol(g, input.as_deref(), *generator, *dim, *samples),
        Command::MeshDerham { input, torus_grid, mesh_format } => mesh_derham(g, input.as_deref(), *torus_grid, *mesh_format),
        Command::Lefschetz { complex, endomorphism } => lefschetz(g, complex, endomorphism),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&outcome.document).expect("documents serialize");
            if writeln!(stdout, "{text}").is_err() {
                return EXIT_INPUT_ERROR;
            }
            outcome.exit_code
        }
        Err(err) => {
            let obj = json!({ "error": err.kind(), "message": err.to_string() });
            eprintln!("{obj}");
            EXIT_INPUT_ERROR
        }
    }
}
