//! Number formatting and the plain-text output formats.

use std::fmt::Write as _;

/// Significant digits of every number written to disk.
pub const DIGITS: usize = 12;

/// `printf("%.12g")`-style formatting: fixed notation for exponents in
/// `[-4, 12)`, scientific otherwise, trailing zeros removed. Negative zero is
/// written as `0`.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One value of a [`Summary`].
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Num(f64),
    Text(String),
    Flag(bool),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(x) => format_g(*x),
            Field::Text(s) => s.clone(),
            Field::Flag(b) => b.to_string(),
        }
    }
}

/// Ordered `key = value` report of scalar results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, Field)>,
}

impl Summary {
    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.entries.push((key.into(), Field::Num(value)));
        self
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), Field::Text(value.into())));
        self
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        self.entries.push((key.into(), Field::Flag(value)));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_num(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Field::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {}", v.render()).expect("write to string");
        }
        out
    }
}

/// Sweep CSV with the fixed header `g,r1,r2,r_m,theta3,theta5`.
pub fn sweep_csv(rows: impl IntoIterator<Item = [f64; 6]>) -> String {
    let mut out = String::from("g,r1,r2,r_m,theta3,theta5\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| format_g(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
