use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qvdp_core::c64;

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error or invalid parameter combination
  3  numeric failure
  4  wrong regime for the requested quantity
  5  insufficient statistics
  6  output not writable";

#[derive(Parser, Debug, Clone)]
#[command(name = "qvdp", version, about = "Squeezed quantum van der Pol oscillator: spectra, phase-space theory and trajectories", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Linear gain rate, the unit of all other rates.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub gamma1: f64,
    /// Mean-field excitation number gamma1 / (2 gamma2).
    #[arg(long, global = true, conflicts_with = "gamma2")]
    pub nex: Option<f64>,
    /// Two-photon loss rate.
    #[arg(long, global = true)]
    pub gamma2: Option<f64>,
    /// Detuning in units of gamma1.
    #[arg(long, global = true, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta_ratio: f64,
    /// Squeezing in units of eta_c = |delta| / 2.
    #[arg(long, global = true, conflicts_with = "eta")]
    pub eta_ratio: Option<f64>,
    /// Squeezing amplitude.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Drive frequency, needed in the laboratory frame.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub omega_s: f64,
    /// Fock-space cutoff (default: chosen from the parameters).
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Harmonic truncation of the phase operators.
    #[arg(long, global = true)]
    pub trunc_m: Option<usize>,
    /// Time step for integrators.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sweep `start:stop:count`, inclusive (eta / eta_c unless noted).
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.start + k as f64 * step).collect()
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err("expected start:stop:count".into());
    };
    let start: f64 = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let stop: f64 = b.trim().parse().map_err(|_| format!("bad stop {b:?}"))?;
    let count: usize = n.trim().parse().map_err(|_| format!("bad count {n:?}"))?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err("grid needs finite bounds and count >= 1".into());
    }
    Ok(Grid { start, stop, count })
}

pub fn parse_complex(s: &str) -> Result<c64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|_| format!("bad real part in {s:?}"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part in {s:?}"))?;
    Ok(c64::new(re, im))
}

/// Comma-separated numbers, kept as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberList(pub Vec<f64>);

pub fn parse_list(s: &str) -> Result<NumberList, String> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad number {x:?}"))).collect::<Result<_, _>>().map(NumberList)
}

pub fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad bound {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad bound {b:?}"))?;
    if !(lo < hi) {
        return Err("need lo < hi".into());
    }
    Ok((lo, hi))
}

/// Initial density matrix for `dynamics`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Vacuum,
    Fock(usize),
    Coherent(c64),
    /// Coherent state at the mean-field fixed point `alpha_+`.
    AlphaPlus,
    Steady,
}

impl InitialState {
    pub fn label(&self) -> String {
        match self {
            InitialState::Vacuum => "vacuum".into(),
            InitialState::Fock(n) => format!("fock({n})"),
            InitialState::Coherent(a) => format!("coherent({},{})", a.re, a.im),
            InitialState::AlphaPlus => "coherent(alpha_plus)".into(),
            InitialState::Steady => "steady_state".into(),
        }
    }
}

pub fn parse_initial(s: &str) -> Result<InitialState, String> {
    match s {
        "vacuum" => Ok(InitialState::Vacuum),
        "alpha-plus" => Ok(InitialState::AlphaPlus),
        "steady" => Ok(InitialState::Steady),
        _ => {
            if let Some(n) = s.strip_prefix("fock:") {
                n.parse().map(InitialState::Fock).map_err(|_| format!("bad Fock index {n:?}"))
            } else if let Some(a) = s.strip_prefix("coherent:") {
                parse_complex(a).map(InitialState::Coherent)
            } else {
                Err("expected vacuum, fock:N, coherent:RE,IM, alpha-plus or steady".into())
            }
        }
    }
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Liouvillian eigenvalues (JSON record or CSV; `--grid` scans eta / eta_c).
    Spectrum(SpectrumArgs),
    /// Band table of the limit-cycle spectrum.
    Bands(BandsArgs),
    /// Mean-field trajectory, or the bifurcation table with `--grid`.
    Meanfield(MeanfieldArgs),
    /// Phase-operator spectra, c_n table and Kramers rates.
    Semiclassical(SemiclassicalArgs),
    /// Stochastic ensembles and their estimators.
    Langevin(LangevinArgs),
    /// <a>(t) in the rotating frame, the laboratory frame or stroboscopically.
    Dynamics(DynamicsArgs),
    /// Stationary occupation <n> / n_ex against eta / eta_c.
    Occupation(OccupationArgs),
    /// Exceptional point of the slowest odd modes.
    Ep(EpArgs),
    /// Symmetry-broken states and their distance from the steady state.
    Ssb(SsbArgs),
    /// Full data pipeline behind figure N (1..=7), with a manifest.
    Fig(FigArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    /// Modes per grid point in scan mode.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    /// Write right eigenmatrices of this many slowest modes to a binary sidecar.
    #[arg(long, default_value_t = 0)]
    pub vectors: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BandsArgs {
    #[arg(long, default_value_t = 3)]
    pub bands: usize,
}

#[derive(Args, Debug, Clone)]
pub struct MeanfieldArgs {
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Initial amplitude `re,im`.
    #[arg(long, value_parser = parse_complex, default_value = "1,0")]
    pub alpha0: c64,
}

#[derive(Args, Debug, Clone)]
pub struct SemiclassicalArgs {
    /// Number of decay constants c_n.
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleKindArg {
    Phase,
    Intensity,
    Amplitude,
}

#[derive(Args, Debug, Clone)]
pub struct LangevinArgs {
    #[arg(long, value_enum, default_value_t = EnsembleKindArg::Phase)]
    pub kind: EnsembleKindArg,
    #[arg(long, default_value_t = 200)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    /// Store every k-th step (default: about every 0.05 / gamma1).
    #[arg(long)]
    pub save_every: Option<usize>,
    /// Also dump raw trajectories (large).
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Rotating,
    Lab,
    Stroboscopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Spectral,
    Rk4,
}

#[derive(Args, Debug, Clone)]
pub struct DynamicsArgs {
    #[arg(long, value_enum, default_value_t = FrameArg::Rotating)]
    pub frame: FrameArg,
    /// vacuum, fock:N, coherent:RE,IM, alpha-plus or steady.
    #[arg(long, value_parser = parse_initial, default_value = "vacuum")]
    pub init: InitialState,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Drive periods for the stroboscopic series.
    #[arg(long, default_value_t = 100)]
    pub periods: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Spectral)]
    pub backend: BackendArg,
}

#[derive(Args, Debug, Clone)]
pub struct OccupationArgs {
    /// Comma-separated n_ex values (default: --nex).
    #[arg(long, value_parser = parse_list)]
    pub nex_list: Option<NumberList>,
}

#[derive(Args, Debug, Clone)]
pub struct EpArgs {
    /// Search bracket in units of eta_c. Defaults to 1:3 for the
    /// Liouvillian; the semiclassical search otherwise widens a bracket
    /// upwards from eta_c.
    #[arg(long, value_parser = parse_bracket)]
    pub bracket: Option<(f64, f64)>,
    /// Use the phase operator instead of the Liouvillian.
    #[arg(long)]
    pub semiclassical: bool,
    /// Comma-separated n_ex values; four or more also fit the EP scaling exponent.
    #[arg(long, value_parser = parse_list)]
    pub nex_list: Option<NumberList>,
}

#[derive(Args, Debug, Clone)]
pub struct SsbArgs {
    #[arg(long, value_parser = parse_list)]
    pub nex_list: Option<NumberList>,
}

#[derive(Args, Debug, Clone)]
pub struct FigArgs {
    #[arg(value_parser = clap::value_parser!(u8).range(1..=7))]
    pub n: u8,
}
