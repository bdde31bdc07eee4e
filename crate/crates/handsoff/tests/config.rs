mod common;

use std::path::{Path, PathBuf};

use common::{fixtures, write};
use handsoff::config::{
    load_job, load_job_from, parse_definition, parse_literal, render_definition, render_literal, ConfigErrorKind, CountingSource,
};
use handsoff_core::{CellAddress, CellValue, KeyColumn, SortOrder};
use proptest::prelude::*;

type KindCheck = fn(&ConfigErrorKind) -> bool;

fn arb_literal() -> impl Strategy<Value = CellValue> {
    prop_oneof![
        (-100_000i64..100_000, 0u32..3).prop_map(|(n, d)| CellValue::Number(n as f64 / 4f64.powi(d as i32))),
        "[ a-zA-Z0-9=\",.]{0,10}".prop_map(CellValue::Text),
        Just(CellValue::Blank),
    ]
}

proptest! {
    #[test]
    fn literal_round_trip(v in arb_literal()) {
        let text = render_literal(&v);
        let back = parse_literal(&text).unwrap();
        // an empty text literal and a blank cell are the same on a sheet
        let v = if v == CellValue::Text(String::new()) { back.clone() } else { v };
        prop_assert_eq!(back, v, "{}", text);
    }

    #[test]
    fn definition_round_trip(
        cells in prop::collection::btree_map((1u32..12, 1u32..6), arb_literal(), 0..25),
        formulas in prop::collection::btree_map((12u32..20, 1u32..6), 0usize..6, 0..10),
    ) {
        const FORMULAS: [&str; 6] = ["=A1+B2*2", "=SUM(A1:E11)", "=IF(A1>0,\"pos\",\"neg\")", "=Data!A1&\" x\"", "=-A1^2", "=Total"];
        let mut text = String::from("[sheet Main]\n");
        for ((r, c), v) in &cells {
            text.push_str(&format!("cell {} = {}\n", CellAddress::new("Main", *r, *c).pos(), render_literal(v)));
        }
        for ((r, c), f) in &formulas {
            text.push_str(&format!("cell {} = {}\n", CellAddress::new("Main", *r, *c).pos(), FORMULAS[*f]));
        }
        text.push_str("[sheet Data]\ncell A1 = 3\n[names]\nTotal = Main!A1:E11\n");
        let first = parse_definition(Path::new("t.sheet"), &text).unwrap();
        let rendered = render_definition(&first.workbook);
        let second = parse_definition(Path::new("t.sheet"), &rendered).unwrap();
        prop_assert_eq!(render_definition(&second.workbook), rendered.clone());
        for s in first.workbook.sheets() {
            for (pos, cell) in s.cells() {
                let a = CellAddress::new(s.name(), pos.row, pos.col);
                prop_assert_eq!(second.workbook.get_value(&a).unwrap(), cell.cached.clone(), "{}", rendered);
            }
        }
    }
}

#[test]
fn every_file_is_read_once() {
    let dir = fixtures();
    let source = CountingSource::default();
    let job = load_job_from(&source, &dir.path().join("dedup.job")).unwrap();
    assert!(job.pipeline.is_some() && job.sort.is_some() && job.subtotals.is_some());
    let reads = source.reads();
    assert_eq!(reads.len(), 2, "{reads:?}");
    assert!(reads.values().all(|&n| n == 1), "{reads:?}");
}

#[test]
fn too_many_subtotal_jobs() {
    let dir = fixtures();
    let mut text = String::from("definition = dedup.sheet\n[expected-headers]\ncolumns = Id, Item, Colour, Number\n[subtotals]\noutput = r.csv\n");
    for _ in 0..10_001 {
        text.push_str("job = Number : Item\n");
    }
    let job = write(dir.path(), "many.job", &text);
    let e = load_job(&job).unwrap_err();
    assert!(matches!(e.kind, ConfigErrorKind::LimitExceeded { found: 10_001, limit: 10_000, .. }), "{e}");

    let at_limit = text.replacen("job = Number : Item\n", "", 1);
    let job = write(dir.path(), "many.job", &at_limit);
    assert!(load_job(&job).unwrap().subtotals.is_some());
}

#[test]
fn unknown_range_name_is_reported_with_its_line() {
    let dir = fixtures();
    let text = std::fs::read_to_string(dir.path().join("caesar.job")).unwrap().replace("= OutputCells", "= OutputCellz");
    let job = write(dir.path(), "typo.job", &text);
    let e = load_job(&job).unwrap_err();
    assert!(matches!(&e.kind, ConfigErrorKind::UnknownRangeName(n) if n == "OutputCellz"), "{e}");
    assert_eq!(e.line, Some(8));
    assert!(e.to_string().starts_with(&format!("{}:8:", job.display())), "{e}");
}

#[test]
fn sort_control_table() {
    let dir = fixtures();
    let job = load_job(&dir.path().join("sort.job")).unwrap();
    assert!(job.warnings.is_empty(), "{:?}", job.warnings);
    let sort = job.sort.unwrap();
    assert!(sort.spec.has_headings);
    assert_eq!(sort.spec.keys.len(), 1);
    assert_eq!(sort.spec.keys[0].column, KeyColumn::Index(1));
    assert_eq!(sort.spec.keys[0].order, SortOrder::Asc);
    assert_eq!(sort.input, dir.path().join("dedup_input.csv"));
    assert_eq!(sort.output, dir.path().join("sorted_output.csv"));
}

#[test]
fn sort_table_with_padding_warns() {
    let dir = fixtures();
    let sheet = std::fs::read_to_string(dir.path().join("sort.sheet")).unwrap().replace("cell B4 = asc", "cell B4 = \" asc \"");
    write(dir.path(), "sort.sheet", &sheet);
    let job = load_job(&dir.path().join("sort.job")).unwrap();
    assert_eq!(job.warnings.len(), 1, "{:?}", job.warnings);
    assert!(job.warnings[0].contains("Control!B4"));
}

#[test]
fn empty_definition() {
    let def = parse_definition(Path::new("empty.sheet"), "").unwrap();
    assert!(def.workbook.sheets().is_empty());
    assert_eq!(render_definition(&def.workbook), "format = 1\n");
}

#[test]
fn definition_errors_carry_lines() {
    let p = Path::new("d.sheet");
    let cases: [(&str, usize, KindCheck); 5] = [
        ("[sheet S]\ncell A1 = 1\ncell A1 = 2\n", 3, |k| matches!(k, ConfigErrorKind::DuplicateCell { first: 2, .. })),
        ("[sheet S]\ncell A1 = =B1\ncell B1 = =A1\n", 2, |k| matches!(k, ConfigErrorKind::Cycle(_))),
        ("[sheet S]\ncell A1 = =Nope*2\n", 2, |k| matches!(k, ConfigErrorKind::Parse(_))),
        ("[sheet S]\ncell A1 = =1+\n", 2, |k| matches!(k, ConfigErrorKind::Parse(_))),
        ("[sheet S]\n[names]\nBig = S!A1:A99999999\n", 3, |k| matches!(k, ConfigErrorKind::NameOutOfBounds { .. })),
    ];
    for (text, line, kind) in cases {
        let e = parse_definition(p, text).unwrap_err();
        assert_eq!(e.line, Some(line), "{text}: {e}");
        assert!(kind(&e.kind), "{text}: {e}");
    }
}

#[test]
fn inverted_corners_name_the_same_range() {
    let text = "[sheet S]\ncell A1 = 1\ncell B2 = 2\n[names]\nBox = S!B2:A1\nTotal = S!A2\ncell = 0\n";
    // the stray line after [names] is not a valid name and must be rejected
    assert!(parse_definition(Path::new("d.sheet"), text).is_err());
    let text = "[sheet S]\ncell A1 = 1\ncell B2 = 2\ncell C1 = =SUM(Box)\n[names]\nBox = S!B2:A1\n";
    let def = parse_definition(Path::new("d.sheet"), text).unwrap();
    assert_eq!(def.workbook.resolve_name("Box").unwrap().to_string(), "S!A1:B2");
    assert_eq!(def.workbook.get_value(&CellAddress::new("S", 1, 3)).unwrap(), CellValue::Number(3.0));
    let def = parse_definition(Path::new("d.sheet"), "[names]\nname X = Main!B2:A1\n[sheet Main]\n").unwrap();
    assert_eq!(def.workbook.resolve_name("X").unwrap().to_string(), "Main!A1:B2");
}

#[test]
fn job_file_errors() {
    let dir = fixtures();
    let cases: [(&str, KindCheck); 5] = [
        ("[nonsense]\n", |k| matches!(k, ConfigErrorKind::UnknownSection(_))),
        ("[pipeline]\ncolour = red\n", |k| matches!(k, ConfigErrorKind::UnknownKey { .. })),
        ("definition = caesar.sheet\n[pipeline]\ninput = a.csv\n", |k| matches!(k, ConfigErrorKind::Missing { .. })),
        ("definition = nowhere.sheet\n", |k| matches!(k, ConfigErrorKind::Read(_))),
        ("format = 2\n", |k| matches!(k, ConfigErrorKind::Parse(_))),
    ];
    for (text, kind) in cases {
        let job: PathBuf = write(dir.path(), "bad.job", text);
        let e = load_job(&job).unwrap_err();
        assert!(kind(&e.kind), "{text}: {e}");
    }
}
