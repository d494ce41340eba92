//! Command-line front end: every subcommand is a thin adapter over the
//! library, reading channels/kernels from flags or JSON files and writing
//! JSON (or flat CSV) reports. All randomness derives from `--seed`.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use polarlab::{
    badness_matrix, bec_transform, bound_m, bundle_endpoints, enumerate_pavements_with,
    error_exponent, gallager_e0, greedy_cover, grid_size, is_good, kernel_count_scale,
    pavement_count, polar_transform, quantize_pair, sample_invertible, simulate, split_seed,
    BmsChannel, Bundle, GoodnessParams, Kernel, KernelTable, Pavement,
};

#[derive(Parser)]
#[command(
    name = "polarlab",
    version,
    about = "Channel quantization, polar transforms and kernel selection for BMS channels",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ChannelArg {
    /// Path to a channel JSON file ({"atoms": [...]}, {"bsc": p} or {"bec": eps})
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Use BSC(p) as the input channel
    #[arg(long, value_name = "P")]
    bsc: Option<f64>,
    /// Use BEC(eps) as the input channel
    #[arg(long, value_name = "EPS")]
    bec: Option<f64>,
}

impl ChannelArg {
    fn load(&self) -> anyhow::Result<BmsChannel> {
        if let Some(path) = &self.channel {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading channel file {}", path.display()))?;
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing channel file {}", path.display()));
        }
        if let Some(p) = self.bsc {
            return Ok(BmsChannel::bsc(p)?);
        }
        Ok(BmsChannel::bec(
            self.bec.expect("clap group guarantees one source"),
        )?)
    }
}

/// `arikan`, `identity:<ell>`, or a path to a kernel JSON file.
fn load_kernel(spec: &str) -> anyhow::Result<Kernel> {
    if spec == "arikan" {
        return Ok(Kernel::arikan());
    }
    if let Some(rest) = spec.strip_prefix("identity:") {
        let ell: usize = rest
            .parse()
            .map_err(|_| anyhow!("invalid identity kernel size {rest:?}"))?;
        return Ok(Kernel::identity(ell)?);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading kernel file {spec}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing kernel file {spec}"))
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a channel into its degraded/upgraded grid pair
    Quantize {
        #[command(flatten)]
        channel: ChannelArg,
        /// Tiles per side (alternative to --ell/--mu)
        #[arg(long)]
        n: Option<usize>,
        /// Kernel size from which to derive the grid
        #[arg(long)]
        ell: Option<usize>,
        /// Targeted scaling exponent from which to derive the grid
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Enumerate all bundles of a grid
    Bundles {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        mu: Option<f64>,
        /// Also list vertex-connected tile runs (Delannoy enumeration)
        #[arg(long)]
        include_vertex_connected: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Per-index entropies of the virtual channels of a channel under a kernel
    Transform {
        #[command(flatten)]
        channel: ChannelArg,
        /// `arikan`, `identity:<ell>`, or a kernel JSON file
        #[arg(long, value_name = "SPEC")]
        kernel: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Exact erasure probabilities of the virtual channels of a BEC
    BecTransform {
        /// Erasure probability of the input BEC
        #[arg(long)]
        eps: f64,
        #[arg(long, value_name = "SPEC")]
        kernel: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Tables of E0(rho) and Er(rate) for a channel
    Exponents {
        #[command(flatten)]
        channel: ChannelArg,
        /// Number of rho grid points in [0, 1]
        #[arg(long, default_value_t = 21)]
        rho_points: usize,
        /// Number of rate grid points in [0, 1]
        #[arg(long, default_value_t = 21)]
        rate_points: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Goodness test of one kernel against one bundle
    Goodness {
        #[arg(long, value_name = "SPEC")]
        kernel: String,
        /// Bundle JSON file ({"pavement": ..., "d": ..., "u": ...})
        #[arg(long, value_name = "FILE", conflicts_with = "pavement")]
        bundle: Option<PathBuf>,
        /// Pavement key such as RRUU; the bundle is its boundary pair
        #[arg(long, value_name = "STEPS")]
        pavement: Option<String>,
        #[arg(long, default_value_t = 3.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        theta_const: f64,
        /// Use the index slack without the +alpha term
        #[arg(long)]
        no_alpha_slack: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Full pipeline: enumerate bundles, sample a kernel pool, test every
    /// pair and greedily cover all bundles
    Select {
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        mu: f64,
        /// Number of kernels to sample
        #[arg(long, default_value_t = 100)]
        pool: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        theta_const: f64,
        #[arg(long)]
        no_alpha_slack: bool,
        #[arg(long)]
        include_vertex_connected: bool,
        /// Also write the badness matrix as CSV
        #[arg(long, value_name = "FILE")]
        matrix_out: Option<PathBuf>,
        /// Also write the bundle-to-kernel assignment as a kernel table
        /// consumable by `simulate --kernel-table`
        #[arg(long, value_name = "FILE")]
        table_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Multi-level polarization simulation with two-sided entropy bounds
    Simulate {
        #[command(flatten)]
        channel: ChannelArg,
        #[arg(long)]
        levels: usize,
        #[arg(long, default_value_t = 3.0)]
        mu: f64,
        /// Default kernel applied to every bundle
        #[arg(long, value_name = "SPEC")]
        kernel: Option<String>,
        /// JSON file {"default": ..., "bundles": {"RU": ...}} of per-bundle kernels
        #[arg(long, value_name = "FILE")]
        kernel_table: Option<PathBuf>,
        /// Entropy threshold classifying a leaf as polarized
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Maximum atoms kept per tracked channel
        #[arg(long, default_value_t = 16)]
        atom_cap: usize,
        /// Also write the per-level histogram as CSV
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Kernel-count bound table over (ell, mu) grids
    Bound {
        /// Comma-separated kernel sizes
        #[arg(long, value_name = "L1,L2,...", value_delimiter = ',', required = true)]
        ell_list: Vec<usize>,
        /// Comma-separated scaling exponents
        #[arg(long, value_name = "M1,M2,...", value_delimiter = ',', required = true)]
        mu_list: Vec<f64>,
        /// Badness probability for the -log_b(B)+2 column
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn resolve_grid(n: Option<usize>, ell: Option<usize>, mu: Option<f64>) -> Result<usize, CliError> {
    match (n, ell, mu) {
        (Some(n), None, None) => Ok(n),
        (None, Some(ell), Some(mu)) => Ok(grid_size(ell, mu).map_err(anyhow::Error::from)?),
        _ => Err(CliError::Usage(
            "pass either --n, or both --ell and --mu".into(),
        )),
    }
}

enum CliError {
    Usage(String),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing output file {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quantize {
            channel,
            n,
            ell,
            mu,
            out,
        } => {
            let w = channel.load()?;
            let n = resolve_grid(n, ell, mu)?;
            let pair = quantize_pair(&w, n)?;
            let report = json!({
                "n": n,
                "pavement": pair.pavement,
                "d": pair.d,
                "u": pair.u,
                "h_w": w.entropy(),
                "h_d": pair.d.entropy(),
                "h_u": pair.u.entropy(),
                "gap": pair.d.entropy() - pair.u.entropy(),
            });
            emit(&out, &pretty(&report))?;
        }
        Command::Bundles {
            n,
            ell,
            mu,
            include_vertex_connected,
            format,
            out,
        } => {
            let n = resolve_grid(n, ell, mu)?;
            let pavements = enumerate_pavements_with(n, include_vertex_connected)?;
            let bundles: Vec<Bundle> = pavements.iter().map(bundle_endpoints).collect();
            let text = match format {
                Format::Json => {
                    let rows: Vec<serde_json::Value> = bundles
                        .iter()
                        .map(|b| {
                            json!({
                                "pavement": b.pavement,
                                "n": n,
                                "h_d": b.d.entropy(),
                                "h_u": b.u.entropy(),
                                "d": b.d,
                                "u": b.u,
                            })
                        })
                        .collect();
                    pretty(&json!({ "n": n, "count": bundles.len(), "bundles": rows }))
                }
                Format::Csv => {
                    let mut text = String::from("pavement,h_d,h_u\n");
                    for b in &bundles {
                        text.push_str(&format!(
                            "{},{},{}\n",
                            b.pavement.key(),
                            b.d.entropy(),
                            b.u.entropy()
                        ));
                    }
                    text
                }
            };
            emit(&out, &text)?;
        }
        Command::Transform {
            channel,
            kernel,
            out,
        } => {
            let w = channel.load()?;
            let g = load_kernel(&kernel)?;
            let children = polar_transform(&w, &g)?;
            let entropies: Vec<f64> = children.iter().map(BmsChannel::entropy).collect();
            let report = json!({
                "ell": g.ell(),
                "input_entropy": w.entropy(),
                "entropies": entropies,
                "entropy_sum": entropies.iter().sum::<f64>(),
                "channels": children,
            });
            emit(&out, &pretty(&report))?;
        }
        Command::BecTransform { eps, kernel, out } => {
            let g = load_kernel(&kernel)?;
            let probs = bec_transform(eps, &g)?;
            let line = probs
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", ");
            emit(&out, &format!("{line}\n"))?;
        }
        Command::Exponents {
            channel,
            rho_points,
            rate_points,
            format,
            out,
        } => {
            if rho_points < 2 || rate_points < 2 {
                return Err(CliError::Usage("grids need at least 2 points".into()));
            }
            let w = channel.load()?;
            let e0: Vec<(f64, f64)> = (0..rho_points)
                .map(|k| {
                    let rho = k as f64 / (rho_points - 1) as f64;
                    Ok((rho, gallager_e0(&w, rho)?))
                })
                .collect::<polarlab::Result<_>>()?;
            let er: Vec<(f64, f64)> = (0..rate_points)
                .map(|k| {
                    let rate = k as f64 / (rate_points - 1) as f64;
                    Ok((rate, error_exponent(&w, rate)?))
                })
                .collect::<polarlab::Result<_>>()?;
            let text = match format {
                Format::Json => pretty(&json!({
                    "entropy": w.entropy(),
                    "capacity": w.capacity(),
                    "e0": e0.iter().map(|(r, v)| json!({"rho": r, "value": v})).collect::<Vec<_>>(),
                    "er": er.iter().map(|(r, v)| json!({"rate": r, "value": v})).collect::<Vec<_>>(),
                })),
                Format::Csv => {
                    let mut text = String::from("quantity,arg,value\n");
                    for (rho, v) in &e0 {
                        text.push_str(&format!("E0,{rho},{v}\n"));
                    }
                    for (rate, v) in &er {
                        text.push_str(&format!("Er,{rate},{v}\n"));
                    }
                    text
                }
            };
            emit(&out, &text)?;
        }
        Command::Goodness {
            kernel,
            bundle,
            pavement,
            mu,
            theta_const,
            no_alpha_slack,
            out,
        } => {
            let g = load_kernel(&kernel)?;
            let bundle = match (bundle, pavement) {
                (Some(path), None) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading bundle file {}", path.display()))?;
                    let b: Bundle = serde_json::from_str(&text)
                        .with_context(|| format!("parsing bundle file {}", path.display()))?;
                    if !b.u.dominates(&b.d) {
                        return Err(CliError::Run(anyhow!(
                            "bundle file {}: upgraded boundary does not dominate the degraded one",
                            path.display()
                        )));
                    }
                    b
                }
                (None, Some(steps)) => {
                    let pavement: Pavement = steps.parse()?;
                    bundle_endpoints(&pavement)
                }
                _ => {
                    return Err(CliError::Usage(
                        "pass exactly one of --bundle or --pavement".into(),
                    ))
                }
            };
            let params = GoodnessParams::new(mu, theta_const, !no_alpha_slack)?;
            let report = is_good(&g, &bundle, &params)?;
            emit(&out, &pretty(&serde_json::to_value(&report)?))?;
        }
        Command::Select {
            ell,
            mu,
            pool,
            seed,
            theta_const,
            no_alpha_slack,
            include_vertex_connected,
            matrix_out,
            table_out,
            out,
        } => {
            if pool == 0 {
                return Err(CliError::Usage("pool size must be at least 1".into()));
            }
            let n = grid_size(ell, mu)?;
            let pavements = enumerate_pavements_with(n, include_vertex_connected)?;
            let bundles: Vec<Bundle> = pavements.iter().map(bundle_endpoints).collect();
            let kernels: Vec<Kernel> = (0..pool)
                .map(|i| sample_invertible(ell, split_seed(seed, i as u64)))
                .collect::<polarlab::Result<_>>()?;
            let params = GoodnessParams::new(mu, theta_const, !no_alpha_slack)?;
            let matrix = badness_matrix(&bundles, &kernels, &params)?;
            let cover = greedy_cover(&matrix);
            if let Some(path) = &matrix_out {
                fs::write(path, matrix.to_csv())
                    .with_context(|| format!("writing matrix file {}", path.display()))?;
            }
            if let Some(path) = &table_out {
                let by_bundle: std::collections::BTreeMap<&String, &Kernel> = cover
                    .assignment
                    .iter()
                    .map(|(key, &id)| (key, &kernels[id]))
                    .collect();
                let table = json!({ "bundles": by_bundle });
                fs::write(path, pretty(&table))
                    .with_context(|| format!("writing kernel table {}", path.display()))?;
            }
            let selected: Vec<serde_json::Value> = cover
                .selected
                .iter()
                .map(|&id| json!({"id": id, "rows": kernels[id].row_strings()}))
                .collect();
            let covered = cover.assignment.len();
            let report = json!({
                "config": {
                    "ell": ell,
                    "mu": mu,
                    "n": n,
                    "pool": pool,
                    "seed": seed,
                    "theta_const": theta_const,
                    "alpha_slack": !no_alpha_slack,
                    "vertex_connected": include_vertex_connected,
                },
                "bundle_count": bundles.len(),
                "covered": covered,
                "coverage": covered as f64 / bundles.len() as f64,
                "selected": selected,
                "assignment": cover.assignment,
                "uncoverable": cover.uncoverable,
                "rounds": cover.rounds,
                "b_max": cover.b_max,
                "bound": cover.bound,
                "failures": matrix.failures.len(),
            });
            emit(&out, &pretty(&report))?;
        }
        Command::Simulate {
            channel,
            levels,
            mu,
            kernel,
            kernel_table,
            delta,
            atom_cap,
            csv,
            out,
        } => {
            let w = channel.load()?;
            let mut by_bundle = HashMap::new();
            let mut default = match &kernel {
                Some(spec) => Some(load_kernel(spec)?),
                None => None,
            };
            if let Some(path) = &kernel_table {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading kernel table {}", path.display()))?;
                let table: serde_json::Value = serde_json::from_str(&text)?;
                if let Some(d) = table.get("default") {
                    default = Some(serde_json::from_value(d.clone())?);
                }
                if let Some(map) = table.get("bundles").and_then(|m| m.as_object()) {
                    for (key, value) in map {
                        by_bundle.insert(key.clone(), serde_json::from_value(value.clone())?);
                    }
                }
            }
            let table = KernelTable::new(by_bundle, default)?;
            let params = GoodnessParams::new(mu, 1.0, true)?;
            let report = simulate(&w, levels, &table, &params, delta, atom_cap)?;
            if let Some(path) = &csv {
                fs::write(path, report.to_csv())
                    .with_context(|| format!("writing csv file {}", path.display()))?;
            }
            emit(&out, &pretty(&serde_json::to_value(&report)?))?;
        }
        Command::Bound {
            ell_list,
            mu_list,
            b,
            format,
            out,
        } => {
            if let Some(b) = b {
                if !(b > 0.0 && b < 1.0) {
                    return Err(CliError::Usage(format!(
                        "badness probability {b} outside (0, 1)"
                    )));
                }
            }
            let mut rows = Vec::new();
            for &ell in &ell_list {
                for &mu in &mu_list {
                    let n = grid_size(ell, mu)?;
                    let bundles = pavement_count(n)?;
                    let m_bound = match b {
                        Some(b) => {
                            let big_b: u64 = bundles.try_into().map_err(|_| {
                                anyhow!("bundle count {bundles} too large for the bound")
                            })?;
                            Some(bound_m(b, big_b)?)
                        }
                        None => None,
                    };
                    rows.push((ell, mu, n, bundles, kernel_count_scale(ell, mu), m_bound));
                }
            }
            let text = match format {
                Format::Json => {
                    let rows: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|(ell, mu, n, bundles, scale, m_bound)| {
                            json!({
                                "ell": ell,
                                "mu": mu,
                                "n": n,
                                "bundles": bundles.to_string(),
                                "kernel_scale": scale,
                                "m_bound": m_bound,
                            })
                        })
                        .collect();
                    pretty(&json!({ "rows": rows }))
                }
                Format::Csv => {
                    let mut text = String::from("ell,mu,n,bundles,kernel_scale,m_bound\n");
                    for (ell, mu, n, bundles, scale, m_bound) in &rows {
                        let m = m_bound.map(|m| m.to_string()).unwrap_or_default();
                        text.push_str(&format!("{ell},{mu},{n},{bundles},{scale},{m}\n"));
                    }
                    text
                }
            };
            emit(&out, &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // usage errors exit with status 2
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
