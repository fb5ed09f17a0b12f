//! `simulate`: sample score files from a synthetic world.

use std::path::{Path, PathBuf};

use calens_core::synthetic::{sample_id, sample_ood, sample_ood_marginal_shifted, ShiftSpec};
use calens_core::ClassMarginals;
use clap::Args;

use crate::config::read_world;
use crate::error::{CliError, CliResult};
use crate::scorefile::{write_conditionals, write_scores};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// World JSON (see README for the schema).
    #[arg(long)]
    pub world: PathBuf,

    /// `id` for the in-distribution set, or a shift expression:
    /// `missing`, `suppressed:tau=F`, `anticorrelated:alpha=F,beta=F`,
    /// `mix:w=F,a=(SPEC),b=(SPEC)`.
    #[arg(long)]
    pub shift: String,

    /// Rows to sample.
    #[arg(long)]
    pub n: usize,

    /// Overrides the world file's seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output prefix; writes PREFIX_std.csv, PREFIX_rob.csv, and
    /// PREFIX_conditionals.csv.
    #[arg(long)]
    pub out: PathBuf,

    /// Experimental: comma-separated target label marginals (e.g.
    /// `0.7,0.3`) applied to a shifted set before labels are drawn.
    /// Aggregate guarantees are not asserted for tilted sets.
    #[arg(long)]
    pub marginal_tilt: Option<String>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(args: &SimulateArgs) -> CliResult<i32> {
    let mut world = read_world(&args.world)?;
    if let Some(seed) = args.seed {
        world.seed = seed;
    }

    let set = if args.shift.trim() == "id" {
        if args.marginal_tilt.is_some() {
            return Err(CliError::format(
                "--marginal-tilt applies only to shifted sets, not `id`",
            ));
        }
        sample_id(&world, args.n)?
    } else {
        let shift: ShiftSpec = args.shift.parse()?;
        match &args.marginal_tilt {
            None => sample_ood(&world, &shift, args.n)?,
            Some(spec) => {
                let probs: Vec<f64> = spec
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            CliError::format(format!(
                                "--marginal-tilt: `{}` is not a number",
                                tok.trim()
                            ))
                        })
                    })
                    .collect::<CliResult<_>>()?;
                let target = ClassMarginals::from_probs(&probs)?;
                sample_ood_marginal_shifted(&world, &shift, args.n, &target)?
            }
        }
    };

    let std_path = with_suffix(&args.out, "_std.csv");
    let rob_path = with_suffix(&args.out, "_rob.csv");
    let cond_path = with_suffix(&args.out, "_conditionals.csv");
    write_scores(&std_path, &set.std_scores, Some(&set.labels), None)?;
    write_scores(&rob_path, &set.rob_scores, Some(&set.labels), None)?;
    write_conditionals(&cond_path, &set)?;
    eprintln!(
        "wrote {} rows to {}, {}, {}",
        set.row_count(),
        std_path.display(),
        rob_path.display(),
        cond_path.display()
    );
    Ok(0)
}
