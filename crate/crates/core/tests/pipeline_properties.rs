use proptest::prelude::*;

use fundus_mosaic::imgcore::Frame;
use fundus_mosaic::phantom::{generate, PhantomConfig, Waypoint};
use fundus_mosaic::pipeline::{run, Config, FrameStatus};

fn sequence(seed: u64) -> Vec<Frame> {
    let config = PhantomConfig {
        frame_count: 9,
        blur_frames: vec![0],
        noise_frames: vec![4],
        trajectory: vec![Waypoint { x: 210.0, y: 230.0, zoom: 1.0 }, Waypoint { x: 300.0, y: 270.0, zoom: 1.04 }],
        seed,
        ..PhantomConfig::default()
    };
    generate(&config).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, ..ProptestConfig::default() })]

    #[test]
    fn run_invariants(seed in 0u64..1000) {
        let frames = sequence(seed);
        let config = Config::default();
        let out = run::<f64>(&frames, &config).unwrap();

        // Every frame is reported once, in input order.
        prop_assert_eq!(out.reports.len(), frames.len());
        for (i, r) in out.reports.iter().enumerate() {
            prop_assert_eq!(r.index, i);
            prop_assert_eq!(r.transform.is_some(), r.status == FrameStatus::Used);
        }
        prop_assert_ne!(out.reports[4].status, FrameStatus::Used);

        // The mosaic is at least as large as the start frame's usable area.
        let start = out.analyses[out.start_index].as_ref().unwrap();
        prop_assert!(out.mosaic.valid.count() >= start.roi.mask.and_not(&start.glare).count());

        // Dropping the rejected frames leaves every used transform unchanged.
        let kept: Vec<usize> = (0..frames.len()).filter(|&i| out.reports[i].status == FrameStatus::Used).collect();
        let subset: Vec<Frame> = kept
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let mut f = frames[i].clone();
                f.index = k;
                f
            })
            .collect();
        let again = run::<f64>(&subset, &config).unwrap();
        prop_assert_eq!(kept[again.start_index], out.start_index);
        for (k, &i) in kept.iter().enumerate() {
            prop_assert_eq!(again.reports[k].status, FrameStatus::Used);
            prop_assert_eq!(again.reports[k].transform, out.reports[i].transform);
        }
        prop_assert_eq!(again.mosaic.to_frame().unwrap(), out.mosaic.to_frame().unwrap());
    }
}
