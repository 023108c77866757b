use std::ffi::{CStr, CString};
use std::ptr;

use transit_hierarchy_ffi::*;

const MODES3: &str = r#"[{"id":1,"name":"walk","walking":true},{"id":2,"name":"bus","walking":false},{"id":3,"name":"metro","walking":false}]"#;

fn leg(mode: u32, distance: f64, k: i64) -> ThLeg {
    ThLeg { mode, board_time: 100 * k, alight_time: 100 * k + 50, distance }
}

fn last_error() -> String {
    let p = th_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn registry3() -> *mut ThRegistry {
    let json = CString::new(MODES3).unwrap();
    let mut reg = ptr::null_mut();
    assert_eq!(th_registry_from_json(json.as_ptr(), &mut reg), ThStatus::Ok);
    reg
}

#[test]
fn worked_example_through_handles() {
    unsafe {
        let reg = registry3();
        assert_eq!(th_registry_len(reg), 3);
        let mut counts = ptr::null_mut();
        assert_eq!(th_counts_new(reg, &mut counts), ThStatus::Ok);
        let legs = [leg(2, 3000.0, 0), leg(3, 5000.0, 1)];
        assert_eq!(th_counts_add_chain(counts, reg, legs.as_ptr(), legs.len()), ThStatus::Ok);
        assert_eq!(th_counts_get(counts, true, 1, 2), 1);
        assert_eq!(th_counts_get(counts, true, 2, 3), 1);
        assert_eq!(th_counts_get(counts, false, 3, 1), 1);
        assert_eq!(th_counts_get(counts, false, 9, 1), 0);
        assert_eq!(th_counts_chains(counts), 1);

        let mut result = ptr::null_mut();
        assert_eq!(th_analyze(counts, reg, ThSign::Flipped, ThUndefined::Exclude, &mut result), ThStatus::Ok);
        let mut score = ThScore::default();
        let expected = [0.0, 0.5, 1.0];
        for (id, h) in (1..=3).zip(expected) {
            assert_eq!(th_result_score(result, id, &mut score), ThStatus::Ok);
            assert_eq!(score.overall, h);
            assert!(score.observed);
        }
        assert_eq!(th_result_ranked_len(result), 3);
        let mut top = 0;
        assert_eq!(th_result_ranked_at(result, 0, &mut top), ThStatus::Ok);
        assert_eq!(top, 3);
        assert_eq!(th_result_ranked_at(result, 3, &mut top), ThStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(th_result_to_json(result, &mut json), ThStatus::Ok);
        let body: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(body["ranking"]["ranked"][0]["mode_name"], "metro");
        th_string_free(json);

        th_result_free(result);
        th_counts_free(counts);
        th_registry_free(reg);
    }
}

#[test]
fn errors_are_codes_with_messages() {
    unsafe {
        let mut reg = ptr::null_mut();
        assert_eq!(th_registry_from_json(ptr::null(), &mut reg), ThStatus::NullArgument);
        assert!(last_error().contains("json"));
        let bad = CString::new(r#"[{"id":1,"name":"bus","walking":false}]"#).unwrap();
        assert_eq!(th_registry_from_json(bad.as_ptr(), &mut reg), ThStatus::InvalidRegistry);
        assert!(reg.is_null());

        let reg = registry3();
        let mut counts = ptr::null_mut();
        th_counts_new(reg, &mut counts);
        let walking = [leg(1, 100.0, 0)];
        assert_eq!(th_counts_add_chain(counts, reg, walking.as_ptr(), 1), ThStatus::InvalidChain);
        assert_eq!(th_counts_add_chain(counts, reg, ptr::null(), 0), ThStatus::InvalidChain);
        assert_eq!(th_counts_chains(counts), 0);
        // A successful call clears the message.
        assert_eq!(th_counts_add_chain(counts, reg, [leg(2, 5.0, 0)].as_ptr(), 1), ThStatus::Ok);
        assert!(th_last_error().is_null());

        let mut seoul = ptr::null_mut();
        assert_eq!(th_registry_seoul(&mut seoul), ThStatus::Ok);
        let mut other = ptr::null_mut();
        th_counts_new(seoul, &mut other);
        assert_eq!(th_counts_merge(counts, other), ThStatus::InvalidArgument);

        th_counts_free(other);
        th_registry_free(seoul);
        th_counts_free(counts);
        th_registry_free(reg);
        th_counts_free(ptr::null_mut());
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let chains = dir.path().join("c.csv");
    let modes = dir.path().join("m.json");
    std::fs::write(
        &chains,
        "chain_id,leg_index,mode_id,board_stop_id,alight_stop_id,board_time,alight_time,distance_m\n\
         n1,1,2,A,B,0,600,3000\nn1,2,3,B,C,700,1500,5000\nbad,1,1,A,B,0,5,10\n",
    )
    .unwrap();
    std::fs::write(&modes, MODES3).unwrap();
    let c = CString::new(chains.to_str().unwrap()).unwrap();
    let m = CString::new(modes.to_str().unwrap()).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            th_analyze_files(c.as_ptr(), m.as_ptr(), ThSign::Flipped, ThUndefined::Exclude, &mut out),
            ThStatus::Ok
        );
        let doc: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        th_string_free(out);
        assert_eq!(doc["kind"], "analyze");
        assert_eq!(doc["ingest"]["chains_rejected"], 1);

        let reg = registry3();
        let mut counts = ptr::null_mut();
        th_counts_new(reg, &mut counts);
        let (mut acc, mut rej) = (0, 0);
        assert_eq!(th_counts_add_csv(counts, reg, c.as_ptr(), &mut acc, &mut rej), ThStatus::Ok);
        assert_eq!((acc, rej), (1, 1));
        assert_eq!(th_counts_get(counts, true, 2, 3), 1);

        let missing = CString::new("/nonexistent/x.csv").unwrap();
        assert_eq!(th_counts_add_csv(counts, reg, missing.as_ptr(), ptr::null_mut(), ptr::null_mut()), ThStatus::Io);
        assert!(last_error().contains("/nonexistent/x.csv"));
        th_counts_free(counts);
        th_registry_free(reg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/transit_hierarchy.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| {
            l.trim_start()
                .strip_prefix("pub unsafe extern \"C\" fn ")
                .or_else(|| l.trim_start().strip_prefix("pub extern \"C\" fn "))
        })
        .map(|l| &l[..l.find('(').unwrap()])
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(!th_version().is_null());
}
