mod common;

use common::*;
use occlusion_bench::degrade::{place_standard, CoverageTarget, DegradationClass};
use occlusion_bench::geometry::Aabb;
use occlusion_bench::raster::BinaryMask;
use occlusion_bench::refine::{refine_page, refine_word, RefinementConfig, RefinementOutcome};
use occlusion_bench::rng::seeded_rng;
use occlusion_bench::synthetic::{default_library, text_page, PageStyle};
use proptest::prelude::*;

fn grid_of(mask: &BinaryMask) -> Vec<Vec<bool>> {
    (0..mask.height()).map(|y| (0..mask.width()).map(|x| mask.get(x, y)).collect()).collect()
}

#[test]
fn degraded_page_matches_oracle() {
    let page = text_page(1000, 1000, 23, PageStyle::default());
    assert!(page.annotations.len() >= 200, "{} words", page.annotations.len());
    let lib = default_library(4);
    let target = CoverageTarget::new(1.5, 1000, 1000).unwrap();
    let out = place_standard(&page.image, DegradationClass::BlackInk, target, &lib, 99).unwrap();
    let grid = grid_of(&out.masks.occlusion);
    let cfg = RefinementConfig::default();
    let refined = refine_page(&page.annotations, &out.masks.occlusion, DegradationClass::BlackInk, &cfg);
    assert_eq!(refined.log.len(), page.annotations.len());
    let mut touched = 0;
    for (entry, a) in refined.log.iter().zip(&page.annotations) {
        let expected = refine_oracle(&grid, &a.bbox(), &cfg);
        assert_eq!(entry.outcome, expected, "word {}", entry.word_index);
        touched += usize::from(expected != RefinementOutcome::KeptUnchanged);
    }
    assert!(touched > 0, "the degradation should affect some words");
    let removed = refined.log.iter().filter(|e| matches!(e.outcome, RefinementOutcome::Removed { .. })).count();
    assert_eq!(refined.annotations.len() + removed, page.annotations.len());
}

#[test]
fn translucent_classes_pass_through() {
    let page = text_page(300, 200, 2, PageStyle::default());
    let mut mask = BinaryMask::new(300, 200);
    mask.fill_rect(0, 0, 300, 200);
    for class in [DegradationClass::Dust, DegradationClass::Stamp, DegradationClass::Scribble] {
        let r = refine_page(&page.annotations, &mask, class, &RefinementConfig::default());
        assert_eq!(r.annotations, page.annotations);
    }
}

proptest! {
    #[test]
    fn random_instances_match_oracle(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let (mask, grid) = random_mask(&mut rng, 64, 32);
        let cfg = random_config(&mut rng);
        use rand::Rng;
        let x1 = rng.gen_range(-8.0..60.0f64);
        let y1 = rng.gen_range(-8.0..30.0f64);
        let b = Aabb::new(x1, y1, x1 + rng.gen_range(0.0..50.0), y1 + rng.gen_range(0.0..25.0)).unwrap();
        prop_assert_eq!(refine_word(&b, &mask, &cfg), refine_oracle(&grid, &b, &cfg));
    }

    #[test]
    fn trimmed_box_stays_inside_the_word(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let (mask, _) = random_mask(&mut rng, 64, 32);
        let cfg = random_config(&mut rng);
        use rand::Rng;
        let (x1, y1) = (rng.gen_range(0..50) as f64, rng.gen_range(0..25) as f64);
        let b = Aabb::new(x1, y1, x1 + rng.gen_range(1..14) as f64, y1 + rng.gen_range(1..7) as f64).unwrap();
        if let RefinementOutcome::Trimmed { new_box } = refine_word(&b, &mask, &cfg) {
            prop_assert!(b.contains(&new_box));
            prop_assert_eq!((new_box.y1, new_box.y2), (b.y1, b.y2));
            prop_assert!(new_box.width() >= cfg.w_min as f64);
        }
    }

    #[test]
    fn clean_mask_keeps_everything(x1 in 0.0f64..50.0, y1 in 0.0f64..20.0, w in 1.0f64..30.0, h in 1.0f64..10.0) {
        let mask = BinaryMask::new(64, 32);
        let b = Aabb::new(x1, y1, x1 + w, y1 + h).unwrap();
        prop_assert_eq!(refine_word(&b, &mask, &RefinementConfig::default()), RefinementOutcome::KeptUnchanged);
    }
}
