//! End to end through the batch commands: generate a small benchmark, cut
//! blanks from one page, score mock predictions and tabulate SSIM and UCSM.
//! Usage: `cargo run --example pipeline -- [out_dir]`

use std::path::PathBuf;

use occlusion_bench::blanks::OcclusionPatch;
use occlusion_bench::cli::{
    cmd_extract_blanks, cmd_generate, cmd_report, cmd_score, write_page_inputs, write_patch_library, ExtractOptions,
    GenerateOptions, ReportOptions, ScoreOptions,
};
use occlusion_bench::degrade::{place_standard, CoverageTarget, DegradationClass};
use occlusion_bench::refine::{refine_page, RefinementConfig};
use occlusion_bench::rng::derive_seed;
use occlusion_bench::synthetic::{default_library, ocr_layout, text_page, PageStyle};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("occlusion-bench/pipeline"));
    let inputs = out.join("inputs");
    std::fs::create_dir_all(&inputs)?;
    let library = default_library(1);

    let manifest = write_patch_library(&inputs, &library)?;
    let mut pages = Vec::new();
    for k in 0..6 {
        let p = text_page(600, 450, derive_seed(1, k), PageStyle::default());
        pages.push(write_page_inputs(&inputs, &format!("page{k}"), &p.image, &p.annotations)?);
    }
    let config = inputs.join("generate.json");
    std::fs::write(
        &config,
        serde_json::to_vec_pretty(&json!({
            "classes": ["black_ink", "whitener"],
            "levels": [1.0, 1.5],
            "pages": pages,
            "patch_manifest": manifest.file_name().unwrap().to_str(),
            "seed": 2024,
        }))?,
    )?;
    let gen = cmd_generate(&GenerateOptions { config, out: Some(out.join("bench")), workers: 4, ..Default::default() })?;
    println!("generate: {} files", gen.manifest.outputs.len());

    // blanks for one page: occluded words vanish from its OCR view
    let page = text_page(600, 450, 2, PageStyle { margin: 16, ..Default::default() });
    let class = DegradationClass::BlackInk;
    let o = place_standard(&page.image, class, CoverageTarget::new(1.5, 600, 450)?, &library, 5)?;
    let patches: Vec<OcclusionPatch> = o
        .record
        .placements
        .iter()
        .enumerate()
        .map(|(i, p)| OcclusionPatch { id: format!("p{i}"), bbox: p.footprint, class })
        .collect();
    let visible = refine_page(&page.annotations, &o.masks.occlusion, class, &RefinementConfig::default()).annotations;
    std::fs::write(inputs.join("ocr.json"), serde_json::to_vec(&ocr_layout(&visible))?)?;
    std::fs::write(inputs.join("patches.json"), serde_json::to_vec(&patches)?)?;
    let blanks_dir = out.join("blanks");
    let ext = cmd_extract_blanks(&ExtractOptions {
        ocr: inputs.join("ocr.json"),
        patches: inputs.join("patches.json"),
        out: blanks_dir.clone(),
    })?;
    println!("extract-blanks: {} blanks", ext.manifest.records["blanks"]);

    // a mock model: the occluded words are the truth; it gets every other
    // one right and drops a character otherwise
    let blanks = std::fs::read_to_string(blanks_dir.join("blanks.jsonl"))?;
    let mut preds = String::new();
    for line in blanks.lines() {
        let b: serde_json::Value = serde_json::from_str(line)?;
        let alpha = b["alpha"].as_u64().unwrap();
        let bx: Vec<f64> = serde_json::from_value(b["box"].clone())?;
        let hidden: Vec<&str> = page
            .annotations
            .iter()
            .filter(|a| {
                let c = a.bbox().center();
                c.x >= bx[0] && c.x <= bx[2] && c.y >= bx[1] && c.y <= bx[3]
            })
            .map(|a| a.text.as_str())
            .collect();
        let truth = if hidden.is_empty() { "-".to_string() } else { hidden.join(" ") };
        let guess = if alpha.is_multiple_of(2) { truth.clone() } else { truth[..truth.len() - 1].to_string() };
        preds.push_str(&json!({ "alpha": alpha, "prediction": guess, "ground_truth": truth }).to_string());
        preds.push('\n');
    }
    std::fs::write(inputs.join("predictions.jsonl"), preds)?;
    let sc = cmd_score(&ScoreOptions {
        predictions: inputs.join("predictions.jsonl"),
        blanks: Some(blanks_dir.join("blanks.jsonl")),
        out: out.join("scores"),
        offline: true,
        workers: 2,
        ..Default::default()
    })?;
    println!("score: mean UCSM {}", sc.manifest.records["mean_ucsm"]);

    // restored == degraded here, so SSIM compares each output with itself
    let bench = out.join("bench");
    let report_cfg = inputs.join("report.json");
    std::fs::write(
        &report_cfg,
        serde_json::to_vec_pretty(&json!({ "rows": [
            { "type": "Black ink", "restored_dir": bench.join("black_ink_t1.0"), "ground_truth_dir": bench.join("black_ink_t1.0"),
              "scores": out.join("scores/scores.jsonl") },
            { "type": "Whitener", "restored_dir": bench.join("whitener_t1.0"), "ground_truth_dir": bench.join("whitener_t1.0") },
        ]}))?,
    )?;
    let rep = cmd_report(&ReportOptions { config: report_cfg, out: out.join("report"), workers: 2 })?;
    print!("{}", std::fs::read_to_string(out.join("report/report.txt"))?);
    for e in &rep.errors {
        println!("note: {}: {}", e.item, e.message);
    }
    println!("wrote {}", out.display());
    Ok(())
}
