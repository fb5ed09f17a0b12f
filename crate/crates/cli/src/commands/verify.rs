//! `verify`: run one verification suite and print its verdict as JSON.
//! Exit code 0 means every check passed, 1 means the verdict failed.

use std::path::PathBuf;

use calens_core::oracle::{
    check_corollary_trivial_bound, check_lemma_softmax, check_lemma_without_marginal_term,
    check_prop1_exhaustive, make_joint_table, JointTable,
};
use calens_core::synthetic::{
    sample_id, sample_ood, verify_proposition, Proposition, ShiftSpec, VerifyConfig,
};
use calens_core::{CheckResult, ClassMarginals, VerdictReport};
use clap::Args;

use crate::config::{read_verify_config, VerifyConfigFile};
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Which claim: 1|2|3|lemma|prop1-exhaustive|corollary.
    ///
    /// 1: in-distribution the logit-sum ensemble is posterior-optimal.
    /// 2: missing/suppressed shifts keep it at least as good as both
    /// models. 3: anticorrelated shifts order it between robust and
    /// standard. lemma: the combined posterior's closed form on a table.
    /// prop1-exhaustive: no combiner beats it on a small table.
    /// corollary: the Bayes error respects the trivial bound.
    #[arg(long)]
    pub prop: String,

    /// JSON config: `world`+`shift`+`n` for 1|2|3, `table` for the rest.
    #[arg(long)]
    pub config: PathBuf,

    /// Overrides the config's sample size.
    #[arg(long)]
    pub n: Option<usize>,

    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &VerifyArgs) -> CliResult<i32> {
    let cfg = read_verify_config(&args.config)?;
    let report = match args.prop.as_str() {
        "1" => sampled(args, &cfg, Proposition::IdOptimality)?,
        "2" => sampled(args, &cfg, Proposition::BenignShift)?,
        "3" => sampled(args, &cfg, Proposition::AnticorrelatedShift)?,
        "lemma" => table_identity(&cfg)?,
        "prop1-exhaustive" => table_exhaustive(&cfg)?,
        "corollary" => table_corollary(&cfg)?,
        other => {
            return Err(CliError::format(format!(
                "unknown --prop `{other}`; expected 1|2|3|lemma|prop1-exhaustive|corollary"
            )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(i32::from(!report.passed))
}

fn sampled(
    args: &VerifyArgs,
    cfg: &VerifyConfigFile,
    which: Proposition,
) -> CliResult<VerdictReport> {
    let mut world = cfg
        .world
        .clone()
        .ok_or_else(|| CliError::format("this check samples a world; the config needs `world`"))?;
    world.validate()?;
    if let Some(seed) = args.seed.or(cfg.seed) {
        world.seed = seed;
    }
    let n = args
        .n
        .or(cfg.n)
        .ok_or_else(|| CliError::format("the config needs `n` (or pass --n)"))?;

    let set = match which {
        Proposition::IdOptimality => {
            if let Some(s) = &cfg.shift {
                if s.trim() != "id" {
                    return Err(CliError::format(format!(
                        "this claim is about the in-distribution set; shift `{s}` does not apply"
                    )));
                }
            }
            sample_id(&world, n)?
        }
        _ => {
            let text = cfg.shift.as_ref().ok_or_else(|| {
                CliError::format("this check needs a `shift` expression in the config")
            })?;
            let shift: ShiftSpec = text.parse()?;
            sample_ood(&world, &shift, n)?
        }
    };
    let vc = VerifyConfig {
        sigma: cfg.sigma.unwrap_or(3.0),
        challenger_seed: cfg.challenger_seed.unwrap_or(0),
    };
    Ok(verify_proposition(&set, which, &vc)?)
}

fn build_table(cfg: &VerifyConfigFile) -> CliResult<JointTable> {
    let tc = cfg
        .table
        .as_ref()
        .ok_or_else(|| CliError::format("this check needs a `table` in the config"))?;
    let marginals = match &tc.marginals {
        Some(p) => ClassMarginals::from_probs(p)?,
        None => ClassMarginals::uniform(tc.class_count)?,
    };
    if marginals.class_count() != tc.class_count {
        return Err(CliError::format(format!(
            "table declares {} classes but lists {} marginals",
            tc.class_count,
            marginals.class_count()
        )));
    }
    Ok(make_joint_table(&tc.s_support, &tc.r_support, &marginals)?)
}

fn table_identity(cfg: &VerifyConfigFile) -> CliResult<VerdictReport> {
    let table = build_table(cfg)?;
    let (name, check) = if cfg.drop_marginal_term {
        (
            "posterior-identity-without-marginal-term",
            check_lemma_without_marginal_term(&table),
        )
    } else {
        ("posterior-identity", check_lemma_softmax(&table))
    };
    let mut report = VerdictReport::new("combined-posterior-closed-form");
    let result = if check.passed {
        CheckResult::pass(name)
    } else {
        CheckResult::fail(
            name,
            format!(
                "max deviation {} at cell {:?}",
                check.max_deviation, check.worst_cell
            ),
        )
    };
    report.push(
        result
            .metric("max_deviation", check.max_deviation)
            .metric("tolerance", check.tolerance),
    );
    Ok(report)
}

fn table_exhaustive(cfg: &VerifyConfigFile) -> CliResult<VerdictReport> {
    let table = build_table(cfg)?;
    let check = check_prop1_exhaustive(&table)?;
    let mut report = VerdictReport::new("exhaustive-combiner-optimality");
    let result = if check.passed {
        CheckResult::pass("no-combiner-beats-the-ensemble")
    } else {
        CheckResult::fail(
            "no-combiner-beats-the-ensemble",
            format!(
                "ensemble {} vs best {} vs bayes {}",
                check.ensemble_error, check.best_error, check.bayes_error
            ),
        )
    };
    report.push(
        result
            .metric("combiner_count", check.combiner_count)
            .metric("bayes_error", check.bayes_error)
            .metric("ensemble_error", check.ensemble_error)
            .metric("best_error", check.best_error),
    );
    Ok(report)
}

fn table_corollary(cfg: &VerifyConfigFile) -> CliResult<VerdictReport> {
    let table = build_table(cfg)?;
    let check = check_corollary_trivial_bound(&table);
    let mut report = VerdictReport::new("trivial-error-bound");
    let result = if check.passed {
        CheckResult::pass("bayes-error-below-majority-rule")
    } else {
        CheckResult::fail(
            "bayes-error-below-majority-rule",
            format!("bayes {} exceeds bound {}", check.bayes_error, check.bound),
        )
    };
    report.push(
        result
            .metric("bayes_error", check.bayes_error)
            .metric("bound", check.bound),
    );
    Ok(report)
}
