//! Degrades a page with black ink and shows how each affected word box is
//! trimmed or dropped. Usage: `cargo run --example refine -- [seed]`

use std::collections::BTreeMap;

use occlusion_bench::degrade::{place_standard, CoverageTarget, DegradationClass};
use occlusion_bench::refine::{refine_page, RefinementConfig, RefinementOutcome};
use occlusion_bench::synthetic::{default_library, text_page, PageStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(3);
    let (w, h) = (800, 800);
    let page = text_page(w, h, seed, PageStyle::default());
    let class = DegradationClass::BlackInk;
    let o = place_standard(&page.image, class, CoverageTarget::new(1.5, w, h)?, &default_library(seed), seed)?;

    let cfg = RefinementConfig::default();
    let refined = refine_page(&page.annotations, &o.masks.occlusion, class, &cfg);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &refined.log {
        let word = &page.annotations[e.word_index];
        let kind = match e.outcome {
            RefinementOutcome::KeptUnchanged => "kept",
            RefinementOutcome::Trimmed { new_box } => {
                let b = word.bbox();
                println!("trim   {:<10} [{:.0}, {:.0}] -> [{:.0}, {:.0}]", word.text, b.x1, b.x2, new_box.x1, new_box.x2);
                "trimmed"
            }
            RefinementOutcome::Removed { reason } => {
                println!("remove {:<10} {reason:?}", word.text);
                "removed"
            }
        };
        *tally.entry(kind).or_default() += 1;
    }
    println!("{tally:?}; {} of {} annotations survive", refined.annotations.len(), page.annotations.len());
    Ok(())
}
