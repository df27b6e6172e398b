use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mre_core::config::PipelineConfig;
use mre_core::eval::{evaluate, generate_test_set, run_experiment, write_samples_csv, ErrorSurface, Estimator};
use mre_core::grid::GridGeom;
use mre_core::inversion::{di_baseline, estimate_wavenumber_map, fuse_modulus, ModulusMap, NormalizedWavenumberMap};
use mre_core::io::table::{write_convergence_csv, write_train_log_csv};
use mre_core::io::{
    read_cgrid, read_cgrid_header_file, series_from_cgrid, series_to_cgrid, write_atomic, write_cgrid,
    write_json_atomic, write_pgm16, CGridFile, CGridHeader, GridKind,
};
use mre_core::net::{train_with_log, TrainedModel};
use mre_core::rng::{stream_rng, streams};
use mre_core::synth::{add_complex_noise, encode_phase_series, solve_helmholtz_phantom, NoiseMode, PhaseOffsetSeries};
use mre_core::unwrap::unwrap_masked;

#[derive(Parser, Debug)]
#[command(name = "mre", version, about = "MR elastography: phase unwrapping, wavenumber networks and modulus inversion")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.train.seed = s;
            cfg.surface.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the Helmholtz phantom and write its displacement field.
    SynthPhantom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Override the drive frequency.
        #[arg(long)]
        frequency_hz: Option<f64>,
    },
    /// Render the plane-wave scene and write its displacement field.
    SynthWave {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Phase-encode a displacement field into wrapped MR images.
    Wrap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the image noise intensity.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Recover the displacement field from wrapped images.
    Unwrap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Convergence CSV (iteration, dc1, dc2, total).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Train the k̃′ and k̃″ networks for one frequency and spacing.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the first configured frequency.
        #[arg(long)]
        frequency_hz: Option<f64>,
        /// Defaults to the phantom spacing.
        #[arg(long)]
        spacing_mm: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Per-step loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Network inversion of one or more wavefields, fused into a modulus map.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Trained models; each input uses the one at its frequency.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Direct (Laplacian) inversion of one or more wavefields.
    InvertDi {
        #[command(flatten)]
        common: Common,
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Mean-error surfaces of DI and, with a model, the networks.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a named end-to-end experiment.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the experiment name.
        #[arg(long)]
        name: Option<String>,
        /// Cache trained models here.
        #[arg(long)]
        model_dir: Option<PathBuf>,
    },
    /// Print the header of a .cgrid file as JSON.
    Info { path: PathBuf },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthPhantom { common, out, frequency_hz } => {
            let cfg = common.load()?;
            let mut ph = cfg.phantom.clone();
            if let Some(f) = frequency_hz {
                ph.frequency_hz = f;
            }
            let sol = solve_helmholtz_phantom(&ph.scene()?, &ph.geom()?, &cfg.solver)?;
            let mut u = sol.field;
            if let Some(mode) = cfg.wave_noise {
                u = add_complex_noise(&u, mode, None, &mut stream_rng(cfg.seed, streams::WAVE_NOISE))?.0;
            }
            eprintln!("solved in {} iterations (relative residual {:e})", sol.iterations, sol.relative_residual);
            let header = CGridHeader::new(u.geom(), GridKind::Displacement).with_frequency(ph.frequency_hz);
            write_cgrid(&out, &CGridFile::complex(u, header))?;
        }
        Command::SynthWave { common, out } => {
            let cfg = common.load()?;
            let mut u = cfg.wave.render()?;
            if let Some(mode) = cfg.wave_noise {
                u = add_complex_noise(&u, mode, None, &mut stream_rng(cfg.seed, streams::WAVE_NOISE))?.0;
            }
            let header = CGridHeader::new(u.geom(), GridKind::Displacement).with_frequency(cfg.wave.frequency_hz);
            write_cgrid(&out, &CGridFile::complex(u, header))?;
        }
        Command::Wrap { common, input, out, sigma } => {
            let cfg = common.load()?;
            let file = read_input(&input)?;
            let freq = file.header.frequency_hz;
            let u = file.into_complex()?;
            let (series, scale) = encode_phase_series(&u, &cfg.encode)?;
            let sigma = sigma.unwrap_or(cfg.image_noise_sigma);
            if !(sigma >= 0.0) {
                bail!(mre_core::Error::Config("sigma must be >= 0".into()));
            }
            let mut rng = stream_rng(cfg.seed, streams::IMAGE_NOISE);
            let images = series
                .images()
                .iter()
                .map(|img| add_complex_noise(img, NoiseMode::Intensity { b: sigma }, None, &mut rng).map(|r| r.0))
                .collect::<mre_core::Result<Vec<_>>>()?;
            let series = PhaseOffsetSeries::new(images, series.offsets().to_vec())?;
            eprintln!("displacement scaled by {scale:.6e}");
            write_cgrid(&out, &series_to_cgrid(&series, freq)?)?;
        }
        Command::Unwrap { common, input, out, log, learning_rate, lambda, iterations } => {
            let mut cfg = common.load()?;
            if let Some(v) = learning_rate {
                cfg.unwrap.learning_rate = v;
            }
            if let Some(v) = lambda {
                cfg.unwrap.lambda = v;
            }
            if let Some(v) = iterations {
                cfg.unwrap.max_iterations = v;
            }
            let file = read_input(&input)?;
            let freq = file.header.frequency_hz;
            let series = series_from_cgrid(file)?;
            let outcome = unwrap_masked(&series, &cfg.unwrap, None)?;
            let mut header = CGridHeader::new(outcome.displacement.geom(), GridKind::Displacement);
            header.frequency_hz = freq;
            write_cgrid(&out, &CGridFile::complex(outcome.displacement, header))?;
            if let Some(p) = log {
                write_atomic(&p, |w| write_convergence_csv(&outcome.log, w.get_mut()))?;
            }
            if let Some(last) = outcome.log.last() {
                eprintln!("final dc1 {:.6e} dc2 {:.6e}", last.dc1, last.dc2);
            }
        }
        Command::Train { common, out, frequency_hz, spacing_mm, steps, log } => {
            let mut cfg = common.load()?;
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            let f = frequency_hz.unwrap_or(cfg.frequencies_hz[0]);
            let h = spacing_mm.unwrap_or(cfg.phantom.spacing_mm);
            let patch = GridGeom::patch(cfg.sampling.ndim, h)?;
            let (model, records) = train_with_log(f, &patch, &cfg.sampling, &cfg.train, |_| {})?;
            write_atomic(&out, |w| model.write_to(w))?;
            if let Some(p) = log {
                write_atomic(&p, |w| write_train_log_csv(&records, w.get_mut()))?;
            }
            eprintln!("model digest {}", model.digest);
        }
        Command::Invert { common, models, inputs, out_dir } => {
            let cfg = common.load()?;
            let models = models
                .iter()
                .map(|p| {
                    let f = fs::File::open(p).with_context(|| format!("opening model {}", p.display()))?;
                    TrainedModel::read_from(&mut BufReader::new(f))
                        .with_context(|| format!("reading model {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let maps = inputs
                .iter()
                .map(|p| {
                    let (u, f, dir) = read_wavefield(p)?;
                    let model = models
                        .iter()
                        .find(|m| (m.frequency_hz - f).abs() <= 1e-9 * f)
                        .ok_or_else(|| mre_core::Error::Config(format!("no model trained at {f} Hz for {}", p.display())))?;
                    let mut m = estimate_wavenumber_map(model, &u, f)?;
                    m.direction = dir;
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            write_inversion(&out_dir, &maps, cfg.density)?;
        }
        Command::InvertDi { common, inputs, out_dir } => {
            let cfg = common.load()?;
            let maps = inputs
                .iter()
                .map(|p| {
                    let (u, f, dir) = read_wavefield(p)?;
                    let mut m = di_baseline(&u, f)?;
                    m.direction = dir;
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            write_inversion(&out_dir, &maps, cfg.density)?;
        }
        Command::Eval { common, model, out_dir } => {
            let cfg = common.load()?;
            let model = model
                .map(|p| -> Result<TrainedModel> {
                    let f = fs::File::open(&p).with_context(|| format!("opening model {}", p.display()))?;
                    Ok(TrainedModel::read_from(&mut BufReader::new(f))?)
                })
                .transpose()?;
            if let Some(m) = &model {
                let sc = &cfg.surface;
                if (m.frequency_hz - sc.frequency_hz).abs() > 1e-9 * sc.frequency_hz
                    || !m.patch_geom.spacing_matches(&sc.patch_geom()?, 0.01)
                {
                    bail!(mre_core::Error::Config(format!(
                        "model ({} Hz, {:?} mm) does not match the surface config ({} Hz, {} mm)",
                        m.frequency_hz,
                        m.patch_geom.spacing_mm(),
                        sc.frequency_hz,
                        sc.spacing_mm
                    )));
                }
            }
            fs::create_dir_all(&out_dir)?;
            let set = generate_test_set(&cfg.surface)?;
            let mut estimators = vec![Estimator::Di];
            if let Some(m) = &model {
                estimators.push(Estimator::Twenn(m));
            }
            let mut summary = serde_json::Map::new();
            for est in estimators {
                let samples = evaluate(est, &set)?;
                let surface = ErrorSurface::from_samples(&samples, &cfg.surface);
                write_atomic(&out_dir.join(format!("samples_{}.csv", est.name())), |w| {
                    write_samples_csv(&samples, w.get_mut())
                })?;
                write_atomic(&out_dir.join(format!("surface_{}.csv", est.name())), |w| surface.write_csv(w.get_mut()))?;
                let marg: Vec<_> = surface
                    .snr_marginal_re()
                    .into_iter()
                    .map(|(b, mean, n)| {
                        serde_json::json!({
                            "snr_lo_db": surface.snr.edges[b],
                            "snr_hi_db": surface.snr.edges[b + 1],
                            "mean_abs_error_k_re": mean,
                            "count": n,
                        })
                    })
                    .collect();
                summary.insert(est.name().into(), serde_json::json!({ "snr_marginal": marg }));
            }
            let doc = serde_json::json!({
                "config_digest": cfg.digest(),
                "error_metric": "mean absolute error",
                "estimators": summary,
            });
            write_json_atomic(&out_dir.join("summary.json"), &doc)?;
        }
        Command::Experiment { common, out_dir, name, model_dir } => {
            let mut cfg = common.load()?;
            if name.is_some() {
                cfg.experiment.name = name;
            }
            if model_dir.is_some() {
                cfg.experiment.model_dir = model_dir;
            }
            let summary = run_experiment(&cfg, &out_dir)?;
            eprintln!("{} finished; {} artifacts in {}", summary.experiment, summary.artifacts.len(), out_dir.display());
        }
        Command::Info { path } => {
            let header = read_cgrid_header_file(&path).with_context(|| format!("reading {}", path.display()))?;
            println!("{}", serde_json::to_string(&header)?);
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<CGridFile> {
    read_cgrid(path).with_context(|| format!("reading {}", path.display()))
}

fn read_wavefield(path: &Path) -> Result<(mre_core::grid::ComplexGrid, f64, Option<String>)> {
    let file = read_input(path)?;
    let f = file
        .header
        .frequency_hz
        .ok_or_else(|| mre_core::Error::Config(format!("{} has no frequency_hz in its header", path.display())))?;
    let dir = file.header.direction_label.clone();
    if file.header.kind != GridKind::Displacement {
        return Err(anyhow!(mre_core::Error::Shape(format!("{} is not a displacement grid", path.display()))));
    }
    Ok((file.into_complex()?, f, dir))
}

fn write_inversion(out_dir: &Path, maps: &[NormalizedWavenumberMap], density: f64) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    for (i, m) in maps.iter().enumerate() {
        let h = |kind| {
            CGridHeader::new(m.geom(), kind)
                .with_frequency(m.frequency_hz)
                .with_direction(m.direction.clone())
        };
        write_cgrid(&out_dir.join(format!("k_re_{i}.cgrid")), &CGridFile::real(m.k_re.clone(), h(GridKind::WavenumberRe)))?;
        write_cgrid(&out_dir.join(format!("k_im_{i}.cgrid")), &CGridFile::real(m.k_im.clone(), h(GridKind::WavenumberIm)))?;
    }
    let fused: ModulusMap = fuse_modulus(maps, density)?;
    let g = fused.geom();
    write_cgrid(&out_dir.join("modulus_re.cgrid"), &CGridFile::real(fused.storage.clone(), CGridHeader::new(g, GridKind::ModulusRe)))?;
    write_cgrid(&out_dir.join("modulus_im.cgrid"), &CGridFile::real(fused.loss.clone(), CGridHeader::new(g, GridKind::ModulusIm)))?;
    write_cgrid(&out_dir.join("mask.cgrid"), &CGridFile::mask(&fused.mask, g))?;
    if g.ndim() == 2 {
        write_pgm16(&out_dir.join("modulus_re.pgm"), &fused.storage, Some(&fused.mask))?;
        write_pgm16(&out_dir.join("modulus_im.pgm"), &fused.loss, Some(&fused.mask))?;
    }
    let valid: Vec<f64> = fused.storage.data().iter().zip(&fused.mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
    let mean = valid.iter().sum::<f64>() / valid.len().max(1) as f64;
    eprintln!("mean G' over {} valid pixels: {mean:.1} Pa", valid.len());
    Ok(())
}
