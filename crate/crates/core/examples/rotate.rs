//! Rotates a synthetic page and checks that the annotation quads follow the
//! text. Usage: `cargo run --example rotate -- [angle] [out_dir]`

use occlusion_bench::degrade::rotate_page;
use occlusion_bench::geometry::transform_quad;
use occlusion_bench::synthetic::{text_page, PageStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let angle: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3.5);
    let out = args.next().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("occlusion-bench/rotate"));
    std::fs::create_dir_all(&out)?;

    let page = text_page(480, 360, 1, PageStyle::default());
    let rotated = rotate_page(&page.image, &page.annotations, angle)?;
    println!("{}x{} -> {}x{} at {angle} deg", page.image.width(), page.image.height(), rotated.image.width(), rotated.image.height());

    let inv = rotated.transform.inverse();
    let worst = page
        .annotations
        .iter()
        .zip(&rotated.annotations)
        .flat_map(|(a, b)| {
            let back = transform_quad(&inv, &b.quad);
            a.quad.corners.into_iter().zip(back.corners).map(|(p, q)| p.distance(&q))
        })
        .fold(0.0, f64::max);
    println!("{} words, max corner round-trip error {worst:.2e} px", page.annotations.len());
    let first = &rotated.annotations[0];
    println!("first word {:?} now at {:?}", first.text, first.quad.to_flat());

    page.image.save(out.join("source.png"))?;
    rotated.image.save(out.join("rotated.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
