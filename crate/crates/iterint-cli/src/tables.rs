use iterint::errors::{closed_form_error, min_truncation, ClosedForm, Objective};
use iterint::{Interval, Result};

/// One recomputed cell next to its printed value.
#[derive(Debug, Clone)]
pub struct Cell {
    pub row: &'static str,
    pub key: String,
    pub ours: f64,
    pub printed: &'static str,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub which: u8,
    pub title: &'static str,
    pub key_name: &'static str,
    pub cells: Vec<Cell>,
}

const TABLE1_DT_EXP: [i32; 8] = [5, 6, 7, 8, 9, 10, 11, 12];
const TABLE1_Q_TRIG: [&str; 8] = ["3", "4", "7", "14", "27", "53", "105", "209"];
const TABLE1_Q_TRIG_STAR: [&str; 8] = ["6", "11", "20", "40", "79", "157", "312", "624"];
const TABLE1_Q_POL: [&str; 8] = ["5", "9", "17", "33", "65", "129", "257", "513"];
const TABLE1_RATIO: [&str; 8] = ["1.67", "2.22", "2.43", "2.36", "2.41", "2.43", "2.45", "2.45"];

const TABLE34_DT: [f64; 4] = [0.08222, 0.05020, 0.02310, 0.01956];
const TABLE3_Q: [&str; 4] = ["19", "51", "235", "328"];
const TABLE3_Q1: [&str; 4] = ["1", "2", "5", "6"];
const TABLE4_P: [&str; 4] = ["8", "21", "96", "133"];
const TABLE4_P1: [&str; 4] = ["1", "1", "3", "4"];
const TABLE4_P_STAR: [&str; 4] = ["23", "61", "286", "398"];
const TABLE4_P1_STAR: [&str; 4] = ["1", "2", "4", "5"];

const Q_COLUMNS: [usize; 5] = [1, 10, 100, 1000, 10000];
const TABLE2: [&str; 5] = ["0.0459", "0.0072", "7.5722e-4", "7.5973e-5", "7.5990e-6"];
const TABLE5: [&str; 5] = ["0.0629", "0.0097", "0.0010", "1.0129e-4", "1.0132e-5"];
const TABLE6: [&str; 5] = ["0.0540", "0.0082", "8.4261e-4", "8.4429e-5", "8.4435e-6"];
const TABLE7: [&str; 5] = ["0.3797", "0.0581", "0.0062", "6.2450e-4", "6.2495e-5"];

/// Significant digits of a printed decimal, trailing zeros included.
pub fn significant_digits(printed: &str) -> usize {
    let mantissa = printed.split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.trim_start_matches('0').len().max(1)
}

/// `|ours − printed| ≤ ½·10^(e−s+1)` with `s = min(4, digits(printed))`, `e = ⌊log₁₀|printed|⌋`.
pub fn matches_printed(ours: f64, printed: &str) -> bool {
    let Ok(v) = printed.parse::<f64>() else { return false };
    let s = significant_digits(printed).min(4) as i32;
    let e = v.abs().log10().floor() as i32;
    (ours - v).abs() <= 0.5 * 10f64.powi(e - s + 1) * (1.0 + 1e-9)
}

fn int_cell(row: &'static str, key: String, ours: usize, printed: &'static str) -> Cell {
    Cell { row, key, ours: ours as f64, printed, pass: printed.parse::<usize>() == Ok(ours) }
}

fn minq(f: ClosedForm, gamma: i32, dt: f64) -> Result<usize> {
    min_truncation(Objective::Closed(f), gamma, Interval::of_length(dt)?)
}

fn table1() -> Result<Table> {
    let mut cells = Vec::new();
    let mut trig = Vec::new();
    let mut pol = Vec::new();
    for (c, &e) in TABLE1_DT_EXP.iter().enumerate() {
        let dt = 2f64.powi(-e);
        let key = format!("2^-{e}");
        let qt = minq(ClosedForm::Trig11, 3, dt)?;
        let qs = minq(ClosedForm::Trig11NoTail, 3, dt)?;
        let qp = minq(ClosedForm::Legendre11, 3, dt)?;
        let qt01 = minq(ClosedForm::Trig01NoTail, 4, dt)?;
        cells.push(int_cell("q_trig", key.clone(), qt, TABLE1_Q_TRIG[c]));
        cells.push(int_cell("q_trig*", key.clone(), qs, TABLE1_Q_TRIG_STAR[c]));
        cells.push(int_cell("q_pol", key.clone(), qp, TABLE1_Q_POL[c]));
        cells.push(int_cell("q_trig (J01 condition)", key, qt01, TABLE1_Q_TRIG[c]));
        trig.push(qt);
        pol.push(qp);
    }
    for (c, &e) in TABLE1_DT_EXP.iter().enumerate() {
        let r = pol[c] as f64 / trig[c] as f64;
        let printed = TABLE1_RATIO[c];
        let pass = (r - printed.parse::<f64>().unwrap()).abs() <= 0.005 + 1e-12;
        cells.push(Cell { row: "q_pol/q_trig", key: format!("2^-{e}"), ours: r, printed, pass });
        let rp = TABLE1_Q_POL[c].parse::<f64>().unwrap() / TABLE1_Q_TRIG[c].parse::<f64>().unwrap();
        let pass = (rp - printed.parse::<f64>().unwrap()).abs() <= 0.005 + 1e-12;
        cells.push(Cell { row: "q_pol/q_trig (printed q)", key: format!("2^-{e}"), ours: rp, printed, pass });
    }
    Ok(Table { which: 1, title: "minimal q for J11 with error <= (T-t)^3", key_name: "T-t", cells })
}

fn table3() -> Result<Table> {
    let mut cells = Vec::new();
    for (c, &dt) in TABLE34_DT.iter().enumerate() {
        let key = format!("{dt}");
        let iv = Interval::of_length(dt)?;
        cells.push(int_cell("q", key.clone(), minq(ClosedForm::Legendre11, 4, dt)?, TABLE3_Q[c]));
        let q1 = min_truncation(Objective::LegendreExact { k: 3 }, 4, iv)?;
        cells.push(int_cell("q1", key, q1, TABLE3_Q1[c]));
    }
    Ok(Table { which: 3, title: "minimal Legendre q for J11 and q1 for J111 with error <= (T-t)^4", key_name: "T-t", cells })
}

fn table4() -> Result<Table> {
    let mut cells = Vec::new();
    for (c, &dt) in TABLE34_DT.iter().enumerate() {
        let key = format!("{dt}");
        cells.push(int_cell("p", key.clone(), minq(ClosedForm::Trig11, 4, dt)?, TABLE4_P[c]));
        cells.push(int_cell("p1", key.clone(), minq(ClosedForm::Trig111, 4, dt)?, TABLE4_P1[c]));
        cells.push(int_cell("p*", key.clone(), minq(ClosedForm::Trig11NoTail, 4, dt)?, TABLE4_P_STAR[c]));
        cells.push(int_cell("p1*", key, minq(ClosedForm::Trig111NoTail, 4, dt)?, TABLE4_P1_STAR[c]));
    }
    Ok(Table { which: 4, title: "minimal trigonometric p, p1 (with tails) and p*, p1* (without) for error <= (T-t)^4", key_name: "T-t", cells })
}

fn value_table(which: u8, title: &'static str, row: &'static str, f: ClosedForm, scale: f64, printed: &[&'static str; 5]) -> Table {
    let unit = Interval::of_length(1.0).expect("unit interval");
    let cells = Q_COLUMNS
        .iter()
        .zip(printed)
        .map(|(&q, &p)| {
            let ours = scale * closed_form_error(f, q, unit).value;
            Cell { row, key: q.to_string(), ours, printed: p, pass: matches_printed(ours, p) }
        })
        .collect();
    Table { which, title, key_name: "q", cells }
}

/// Recomputes table `which` (1 to 7).
pub fn table(which: u8) -> Result<Table> {
    Ok(match which {
        1 => table1()?,
        2 => value_table(2, "trigonometric J111 error with tails", "eps/(T-t)^3", ClosedForm::Trig111, 1.0, &TABLE2),
        3 => table3()?,
        4 => table4()?,
        5 => value_table(5, "trigonometric J111 error without tails", "eps/(T-t)^3", ClosedForm::Trig111NoTail, 1.0, &TABLE5),
        6 => value_table(6, "trigonometric J*011 error", "4 eps/(T-t)^4", ClosedForm::Trig011Strat, 4.0, &TABLE6),
        7 => value_table(7, "Legendre J*011 error", "16 eps/(T-t)^4", ClosedForm::Legendre011Strat, 16.0, &TABLE7),
        _ => return Err(iterint::Error::InvalidArgument(format!("unknown table {which}; expected 1 to 7"))),
    })
}
