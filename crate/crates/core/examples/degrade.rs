//! Applies every degradation class to one page and saves the results with
//! their coverage masks. Usage: `cargo run --example degrade -- [seed] [out_dir]`

use occlusion_bench::degrade::{place_scribbles, place_stamp, place_standard, CoverageTarget, DegradationClass};
use occlusion_bench::synthetic::{default_library, text_page, PageStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);
    let out = args.next().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("occlusion-bench/degrade"));
    std::fs::create_dir_all(&out)?;

    let (w, h) = (800, 600);
    let page = text_page(w, h, seed, PageStyle::default());
    let library = default_library(seed);

    for class in DegradationClass::OPAQUE.into_iter().chain([DegradationClass::Dust]) {
        for level in CoverageTarget::LEVELS {
            let target = CoverageTarget::new(level, w, h)?;
            let o = place_standard(&page.image, class, target, &library, seed)?;
            let r = &o.record;
            println!(
                "{:<10} T={level:.1}%  target {:>6.0} px  covered {:>6}  patches {} (+{} top-up passes){}",
                class.as_str(),
                target.target_area,
                r.achieved_area,
                r.placements.len(),
                r.topup_passes,
                if r.exhausted { "  EXHAUSTED" } else { "" }
            );
            if level == 1.0 {
                o.image.save(out.join(format!("{class}.png")))?;
                o.masks.coverage.to_image().save(out.join(format!("{class}_coverage.png")))?;
            }
        }
    }

    let s = place_scribbles(&page.image, &page.annotations, &[], &library, seed)?;
    let removed: Vec<&str> = s.removed.iter().map(|&i| page.annotations[i].text.as_str()).collect();
    println!("scribble   struck out {removed:?}");
    s.image.save(out.join("scribble.png"))?;

    let st = place_stamp(&page.image, &library, seed)?;
    println!("stamp      mode {:?} at {:?}", st.record.stamp_mode, st.record.placements[0].footprint.to_array());
    st.image.save(out.join("stamp.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
