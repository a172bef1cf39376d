//! `train`: optimize the toy policy on a pair file and write the trained
//! parameters, the report, and the loss curve.

use anyhow::{Context, Result};

use tutor_align_core::losses::LossConfig;
use tutor_align_core::policy::{load_params, save_params, PolicyParams, Vocab};
use tutor_align_core::prefdata::load_pairs;
use tutor_align_core::trainer::{train, TrainConfig};
use tutor_align_core::Real;

use super::{ensure_dir, output_dir, write_text};
use crate::{Globals, TrainArgs};

pub fn run(globals: &Globals, args: &TrainArgs) -> Result<()> {
    let config = globals.optional_config()?;
    let seed = globals
        .seed
        .or_else(|| config.as_ref().map(|c| c.seed))
        .unwrap_or(0);

    let (pairs, _corpus_hash) =
        load_pairs(&args.pairs).with_context(|| format!("loading pairs {}", args.pairs.display()))?;

    let (params, vocab): (PolicyParams<Real>, Vocab) = match &args.params_in {
        Some(path) => {
            load_params(path).with_context(|| format!("loading params {}", path.display()))?
        }
        None => {
            let texts: Vec<&str> = pairs
                .iter()
                .flat_map(|p| [p.chosen.as_str(), p.rejected.as_str()])
                .collect();
            let vocab = Vocab::build(texts)?;
            (PolicyParams::uniform(args.contexts, vocab.len()), vocab)
        }
    };

    let mut loss = LossConfig::<Real>::for_method(args.method.into());
    if let Some(beta) = args.beta {
        loss.beta = beta;
    }
    if let Some(lambda) = args.lambda {
        loss.lambda = lambda;
    }
    if let Some(gamma) = args.gamma {
        loss.gamma = gamma;
    }

    let cfg = TrainConfig {
        loss,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        seed,
        holdout_fraction: args.holdout_fraction,
    };
    let (trained, report) = train(&params, &pairs, &vocab, &cfg)?;

    let out = output_dir(globals, config.as_ref());
    ensure_dir(&out)?;
    save_params(&out.join("params.json"), &trained, &vocab)?;
    write_text(
        &out.join("train_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let mut curve = String::from("epoch,mean_loss\n");
    for (epoch, loss) in report.epoch_mean_loss.iter().enumerate() {
        curve.push_str(&format!("{epoch},{loss}\n"));
    }
    write_text(&out.join("loss_curve.csv"), &curve)?;

    let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "train: method {} on {} pairs ({} train / {} holdout), {} epochs; holdout win-rate {} (baseline {}); outputs in {}",
        cfg.loss.method.name(),
        pairs.len(),
        report.train_size,
        report.holdout_size,
        cfg.epochs,
        fmt(report.holdout_win_rate),
        fmt(report.baseline_win_rate),
        out.display()
    );
    Ok(())
}
