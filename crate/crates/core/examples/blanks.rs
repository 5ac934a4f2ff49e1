//! Turns the patches placed on a degraded page into blanks and fill-mask
//! prompts. Usage: `cargo run --example blanks -- [seed]`

use occlusion_bench::blanks::{
    extract_blanks, generate_prompt_tokens, group_lines, visibility_gate, GateDecision, OcclusionPatch, TextMargins,
};
use occlusion_bench::degrade::{place_standard, CoverageTarget, DegradationClass};
use occlusion_bench::refine::{refine_page, RefinementConfig};
use occlusion_bench::synthetic::{default_library, ocr_layout, text_page, PageStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(2);
    let (w, h) = (700, 500);
    let page = text_page(w, h, seed, PageStyle { margin: 16, ..Default::default() });
    let library = default_library(seed);

    let mut patches = Vec::new();
    let mut words = page.annotations.clone();
    for (k, class) in [DegradationClass::Whitener, DegradationClass::BlackInk, DegradationClass::Dust].into_iter().enumerate() {
        let o = place_standard(&page.image, class, CoverageTarget::new(1.5, w, h)?, &library, seed + k as u64)?;
        for (i, p) in o.record.placements.iter().enumerate() {
            patches.push(OcclusionPatch { id: format!("{}_{i}", class.as_str()), bbox: p.footprint, class });
        }
        // stand-in for OCR: occluded words disappear, dust leaves text readable
        words = refine_page(&words, &o.masks.occlusion, class, &RefinementConfig::default()).annotations;
    }

    let lines = group_lines(&ocr_layout(&words));
    let margins = TextMargins::from_lines(&lines).ok_or("empty page")?;
    let active: Vec<OcclusionPatch> = patches
        .into_iter()
        .filter(|p| {
            let gate = visibility_gate(p, &lines);
            if gate == GateDecision::InpaintOnly {
                println!("{}: text still readable, inpaint only", p.id);
            }
            gate == GateDecision::Reconstruct
        })
        .collect();

    let blanks = extract_blanks(&lines, &active, &margins);
    let tokens = generate_prompt_tokens(&blanks);
    println!("{} lines, {} patches kept, {} blanks", lines.len(), active.len(), blanks.len());
    for (b, t) in blanks.iter().zip(&tokens) {
        println!("#{:<3} {:<5} line {:>2} width {:>5.1}  {}", b.alpha, b.blank_type, b.line, b.blank_width, t.token);
    }
    Ok(())
}
