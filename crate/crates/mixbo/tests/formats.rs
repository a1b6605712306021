use mixbo::formats::{read_measurements, read_results, write_batch_sheet, write_pool};
use mixbo::AppError;
use mixbo_core::acquisition::{BatchSuggestion, Method, SuggestedCandidate};
use mixbo_core::campaign::{ResultEntry, Source};
use mixbo_core::space::{enumerate_pool, ComponentSet};
use proptest::prelude::*;

fn space() -> ComponentSet {
    ComponentSet {
        names: vec!["a".into(), "b".into(), "c".into()],
        increment: 0.5,
        per_component_max: None,
        total_min: 0.5,
        total_max: 2.0,
    }
}

fn batch(space: &ComponentSet) -> BatchSuggestion {
    let pool = enumerate_pool(space, 1000).unwrap();
    BatchSuggestion {
        method: Method::Qlognehvi,
        seed: 3,
        candidates: pool
            .iter()
            .take(4)
            .enumerate()
            .map(|(i, f)| SuggestedCandidate {
                formulation: f.clone(),
                mean: Some(0.1 * i as f64),
                sd: Some(0.01),
                score: -(i as f64),
            })
            .collect(),
        model: None,
    }
}

fn fill(sheet: &str, values: &[[f64; 3]]) -> String {
    let mut lines = sheet.lines();
    let mut out = format!("{}\n", lines.next().unwrap());
    for (line, v) in lines.zip(values) {
        let trimmed = line.trim_end_matches(",,,");
        out.push_str(&format!("{trimmed},{},{},{}\n", v[0], v[1], v[2]));
    }
    out
}

#[test]
fn filled_batch_sheet_reads_back_as_results() {
    let s = space();
    let b = batch(&s);
    let mut sheet = Vec::new();
    write_batch_sheet(&s, &b, 3, &mut sheet).unwrap();
    let sheet = String::from_utf8(sheet).unwrap();
    assert!(sheet.starts_with(
        "id,a,b,c,predicted_mean,predicted_sd,score,replicate_1,replicate_2,replicate_3\n"
    ));
    let values = [
        [0.9, 0.8, 0.85],
        [0.1, 0.2, 0.3],
        [0.5, 0.55, 0.6],
        [1.2, 0.0, 0.7],
    ];
    let read = read_results(fill(&sheet, &values).as_bytes(), &s).unwrap();
    let expected: Vec<ResultEntry> = b
        .candidates
        .iter()
        .zip(&values)
        .map(|(c, v)| ResultEntry {
            id: c.formulation.id(),
            replicates: v.to_vec(),
        })
        .collect();
    assert_eq!(read, expected);
}

#[test]
fn unfilled_rows_are_skipped() {
    let s = space();
    let mut sheet = Vec::new();
    write_batch_sheet(&s, &batch(&s), 3, &mut sheet).unwrap();
    let sheet = String::from_utf8(sheet).unwrap();
    let filled = fill(&sheet, &[[0.5, 0.5, 0.5]]);
    let partial: String = filled
        .lines()
        .chain(sheet.lines().skip(2))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(read_results(partial.as_bytes(), &s).unwrap().len(), 1);
}

#[test]
fn malformed_rows_report_their_line() {
    let s = space();
    let csv = "a,b,c,replicate_1\n0.5,0,0,0.9\n0.5,0.5,0,zero\n";
    match read_results(csv.as_bytes(), &s) {
        Err(AppError::Row { row, .. }) => assert_eq!(row, 3),
        other => panic!("expected a row error, got {other:?}"),
    }
    let off_grid = "a,b,c,replicate_1\n0.3,0,0,0.9\n";
    assert!(matches!(
        read_results(off_grid.as_bytes(), &s),
        Err(AppError::Row { row: 2, .. })
    ));
    let wrong_id = format!(
        "id,a,b,c,replicate_1\n{},0.5,0,0,0.9\n",
        s.formulation(&[1.0, 0.0, 0.0]).unwrap().id()
    );
    assert!(matches!(
        read_results(wrong_id.as_bytes(), &s),
        Err(AppError::Row { row: 2, .. })
    ));
    let nan = "a,b,c,replicate_1\n0.5,0,0,NaN\n";
    assert!(matches!(
        read_results(nan.as_bytes(), &s),
        Err(AppError::Row { row: 2, .. })
    ));
    let missing = "a,b,replicate_1\n0.5,0,0.9\n";
    assert!(matches!(
        read_results(missing.as_bytes(), &s),
        Err(AppError::Validation(_))
    ));
}

#[test]
fn measurements_need_compositions() {
    let s = space();
    let ok = "a,b,c,replicate_1,replicate_2\n0.5,0,0,0.9,0.8\n";
    let m = read_measurements(ok.as_bytes(), &s, Source::Lab).unwrap();
    assert_eq!(m[0].formulation, s.formulation(&[0.5, 0.0, 0.0]).unwrap());
    assert_eq!(m[0].replicates, vec![0.9, 0.8]);
    let id = s.formulation(&[0.5, 0.0, 0.0]).unwrap().id();
    let ids_only = format!("id,replicate_1\n{id},0.9\n");
    assert!(read_measurements(ids_only.as_bytes(), &s, Source::Lab).is_err());
}

#[test]
fn pool_csv_lists_every_formulation() {
    let s = space();
    let pool = enumerate_pool(&s, 1000).unwrap();
    let mut out = Vec::new();
    write_pool(&s, &pool, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), pool.len() + 1);
    for (line, f) in text.lines().skip(1).zip(&pool) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], f.id().to_string());
        let conc: Vec<f64> = cols[1..4].iter().map(|c| c.parse().unwrap()).collect();
        assert_eq!(s.formulation(&conc).unwrap(), *f);
    }
}

proptest! {
    #[test]
    fn replicate_values_roundtrip(values in proptest::collection::vec(proptest::array::uniform3(0.0f64..1.2), 4)) {
        let s = space();
        let b = batch(&s);
        let mut sheet = Vec::new();
        write_batch_sheet(&s, &b, 3, &mut sheet).unwrap();
        let filled = fill(&String::from_utf8(sheet).unwrap(), &values);
        let read = read_results(filled.as_bytes(), &s).unwrap();
        for (r, v) in read.iter().zip(&values) {
            prop_assert_eq!(&r.replicates, &v.to_vec());
        }
    }
}
