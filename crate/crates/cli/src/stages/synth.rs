use credfuse::data::{generate_synthetic, write_dataset};

use crate::artifact;
use crate::error::CliResult;
use crate::RunContext;

use super::with_stage;

/// Generate the synthetic loan book and write it as one CSV.
pub fn run(ctx: &RunContext) -> CliResult<()> {
    with_stage(ctx, "synth", |ctx, manifest| {
        let mut config = ctx.config.synth.clone();
        config.seed = ctx.stage_seed("synth");
        let dataset = generate_synthetic(&config)?;

        // The writer targets a path; stage it next to the final location,
        // then hand the bytes to the manifest for the atomic move.
        let staging = ctx.out.join(".dataset.staging.csv");
        write_dataset(&dataset, &staging)?;
        let bytes = std::fs::read(&staging)?;
        std::fs::remove_file(&staging)?;
        manifest.put(&ctx.out, artifact::DATASET, &bytes)?;

        let defaults = dataset.records.iter().filter(|r| r.label == 1).count();
        log::info!(
            "synth: {} records, {} defaults, {} cohorts",
            dataset.len(),
            defaults,
            dataset.cohorts().len()
        );
        Ok(())
    })
}
