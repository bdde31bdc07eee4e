mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{fixtures, write};
use handsoff::commands::{self, Overrides};
use handsoff::pipeline::{Diagnostics, OnRecordError};
use handsoff::Error;
use handsoff_core::report::{aggregate_lenient, parse_subtotal_job};
use handsoff_core::{aggregate, render_report, split_fields, CsvMode, HeaderMap, ReportFormat};
use proptest::prelude::*;

const HEADERS: [&str; 4] = ["Item", "Colour", "Number", "Amount"];

fn arb_records() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(
        (prop_oneof![Just("Toga"), Just("Cape"), Just("a,b"), Just("")], prop_oneof![Just("Red"), Just("Blue")], -50i32..50, 0u32..1000)
            .prop_map(|(i, c, n, a)| vec![i.to_string(), c.to_string(), n.to_string(), a.to_string()]),
        0..100,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matches_brute_force_group_by(records in arb_records(), line in prop_oneof![
        Just("Number : Item, Colour"),
        Just("Number, Amount : Item"),
        Just("Amount : Colour : count"),
        Just("Number, Amount : Colour, Item : sum"),
    ]) {
        let (job, _) = parse_subtotal_job(line, &HeaderMap::new(&HEADERS)).unwrap();
        let table = aggregate(&records, &job).unwrap();
        let groups: Vec<usize> = job.group_by.iter().map(|g| g.index).collect();
        let measures: Vec<usize> = job.measures.iter().map(|m| m.index).collect();
        let count = line.ends_with("count");
        let mut want: BTreeMap<Vec<String>, Vec<i64>> = BTreeMap::new();
        for r in &records {
            let key: Vec<String> = groups.iter().map(|&g| r[g].clone()).collect();
            let sums = want.entry(key).or_insert_with(|| vec![0; measures.len()]);
            for (s, &m) in sums.iter_mut().zip(&measures) {
                *s += if count { 1 } else { r[m].parse::<i64>().unwrap() };
            }
        }
        let got: BTreeMap<Vec<String>, Vec<i64>> =
            table.rows.iter().map(|r| (r.key.clone(), r.values.iter().map(|v| *v as i64).collect())).collect();
        prop_assert_eq!(&got, &want);
        for (i, &m) in measures.iter().enumerate() {
            let total: i64 = records.iter().map(|r| if count { 1 } else { r[m].parse::<i64>().unwrap() }).sum();
            prop_assert_eq!(table.rows.iter().map(|r| r.values[i] as i64).sum::<i64>(), total);
        }

        // the CSV rendering reads back as the table
        let csv = render_report(&table, ReportFormat::Csv);
        let lines: Vec<Vec<String>> = csv.lines().map(|l| split_fields(l, CsvMode::Rfc4180).unwrap()).collect();
        prop_assert_eq!(&lines[0], &table.headers);
        prop_assert_eq!(lines[1..].to_vec(), table.records().collect::<Vec<_>>());
    }
}

#[test]
fn aligned_text_layout() {
    let (job, _) = parse_subtotal_job("Number : Item", &HeaderMap::new(&HEADERS)).unwrap();
    let records: Vec<Vec<&str>> = vec![vec!["Toga", "Red", "1459", "0"], vec!["Cape", "Red", "14", "0"], vec!["Toga", "Red", "90", "0"]];
    let table = aggregate(&records, &job).unwrap();
    assert_eq!(render_report(&table, ReportFormat::AlignedText), "Item  Sum of Number\nCape             14\nToga           1549\n");
}

#[test]
fn non_numeric_measures() {
    let (job, _) = parse_subtotal_job("Number : Item", &HeaderMap::new(&HEADERS)).unwrap();
    let records: Vec<Vec<&str>> = vec![vec!["Toga", "Red", "1", "0"], vec!["Cape", "Red", "MCD", "0"], vec!["Toga", "Red", "2", "0"]];
    let err = aggregate(&records, &job).unwrap_err();
    assert!(err.to_string().contains("MCD"));
    let (table, errors) = aggregate_lenient(&records, &job);
    assert_eq!(errors.len(), 1);
    assert_eq!(table.records().collect::<Vec<_>>(), vec![vec!["Toga".to_string(), "3".to_string()]]);
}

#[test]
fn report_from_control_block_on_a_sheet() {
    let dir = fixtures();
    let sheet = fs::read_to_string(dir.path().join("dedup.sheet")).unwrap()
        + "\n[sheet Report]\ncell A1 = Subtotal these Amounts\ncell B1 = for Column Names\ncell A2 = Number\ncell B2 = Item, Colour\ncell A3 = Number\ncell B3 = Item\ncell C3 = count\n";
    let sheet = sheet.replace("CarryForward = Main!A11:D11", "CarryForward = Main!A11:D11\nSubtotals = Report!A1:C3");
    write(dir.path(), "dedup.sheet", &sheet);
    let job = fs::read_to_string(dir.path().join("dedup.job")).unwrap();
    let job = job.replace("job = Number : Item, Colour\njob = Number : Item\n", "params = Subtotals\nformat = aligned-text\n");
    write(dir.path(), "dedup.job", &job);

    let mut sink = Vec::new();
    let mut diag_out = Vec::new();
    let mut diag = Diagnostics::new(&mut diag_out, usize::MAX, true);
    commands::run(&dir.path().join("dedup.job"), &Overrides { quiet: true, ..Overrides::default() }, &mut diag, &mut sink).unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("dedup_report.csv")).unwrap(),
        "Item  Colour  Sum of Number\n\
         Cape  Red                14\n\
         Toga  Purple           1459\n\
         Toga  White              90\n\
         \n\
         Item  Count of Number\n\
         Cape                1\n\
         Toga                2\n"
    );
}

#[test]
fn bad_measure_in_data_file_names_the_record() {
    let dir = fixtures();
    write(dir.path(), "data.csv", "Id,Item,Colour,Number\n1,Toga,Red,4\n2,Cape,Red,IV\n");
    let mut sink = Vec::new();
    let mut diag_out = Vec::new();
    let mut diag = Diagnostics::new(&mut diag_out, usize::MAX, true);
    let ov = Overrides { quiet: true, ..Overrides::default() };
    let err = commands::report(&dir.path().join("dedup.job"), Some(&dir.path().join("data.csv")), &ov, &mut diag, &mut sink).unwrap_err();
    assert!(matches!(err, Error::Data { record: 2, .. }), "{err}");
    assert_eq!(err.exit_code(), 2);

    let ov = Overrides { on_record_error: Some(OnRecordError::SkipAndLog), ..ov };
    let mut diag = Diagnostics::new(&mut diag_out, usize::MAX, true);
    commands::report(&dir.path().join("dedup.job"), Some(&dir.path().join("data.csv")), &ov, &mut diag, &mut sink).unwrap();
    assert!(String::from_utf8_lossy(&diag_out).contains("warning:"));
}
