//! Scores a few predictions with UCSM, once with recorded provider outputs
//! and once offline. Usage: `cargo run --example score`

use occlusion_bench::ucsm::{summarize, ucsm, ContextCalibration, FixedCosine, FixedLogProb, Providers, UcsmWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = UcsmWeights::default();
    let cal = ContextCalibration::default();
    // (prediction, ground truth, cosine, log P(gt | context))
    let cases = [
        ("approved", "approved", 1.0, -1.0),
        ("approve", "approved", 0.96, -3.0),
        ("accepted", "approved", 0.7, -3.0),
        ("banana", "approved", -0.2, -3.0),
        ("the proposed method", "the suggested approach", 0.76, -4.5),
    ];
    let mut reports = Vec::new();
    println!("{:<22} {:<22} {:>6} {:>6} {:>6} {:>6} {:>6}", "prediction", "truth", "edit", "sem", "len", "E", "UCSM");
    for (p, gt, cos, lp) in cases {
        let (sem, ctx) = (FixedCosine(cos), FixedLogProb(lp));
        let providers = Providers { semantic: Some(&sem), context: Some(&ctx) };
        let r = ucsm(p, gt, "the motion was", "by the board", &providers, &w, &cal)?;
        println!("{p:<22} {gt:<22} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}", r.s_edit, r.s_sem, r.s_len, r.e_context, r.ucsm);
        reports.push(r);
    }
    let s = summarize(&reports);
    println!("mean UCSM {:.3}, CER {:.3}, exact {:.0}%", s.mean_ucsm, s.cer, s.exact_match_pct);

    let offline = ucsm("accepted", "approved", "", "", &Providers::offline(), &w, &cal)?;
    println!("offline: sem {} E {} ({:?}) -> {:.3}", offline.s_sem, offline.e_context, offline.provenance, offline.ucsm);
    Ok(())
}
