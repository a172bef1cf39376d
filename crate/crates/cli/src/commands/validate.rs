//! `validate`: check a pair file against its train corpus, or a corpus file
//! on its own.

use anyhow::{bail, Result};

use tutor_align_core::corpus::Split;
use tutor_align_core::prefdata::validate_pairs;

use super::load_corpus_resolved;
use crate::{Globals, ValidateArgs};

pub fn run(_globals: &Globals, args: &ValidateArgs) -> Result<()> {
    match (&args.pairs, &args.train_corpus, &args.corpus, &args.split) {
        (Some(pairs), Some(train_path), None, None) => {
            let train = load_corpus_resolved(train_path, Split::Train)?;
            let report = validate_pairs(pairs, &train)?;
            println!("validate: {}", report.summary());
            if !report.pass {
                bail!("pair file failed validation");
            }
            Ok(())
        }
        (None, None, Some(corpus_path), Some(split)) => {
            let corpus = load_corpus_resolved(corpus_path, (*split).into())?;
            println!(
                "validate: {} is a valid {} corpus with {} samples",
                corpus_path.display(),
                corpus.split,
                corpus.len()
            );
            Ok(())
        }
        _ => bail!(
            "use either --pairs <file> --train-corpus <file>, or --corpus <file> --split <train|test>"
        ),
    }
}
