use super::IoError;

#[derive(Debug, Clone, PartialEq)]
pub struct LeadInfo {
    /// Payload file named on the lead line.
    pub file: String,
    /// ADC units per millivolt.
    pub gain: f64,
    pub name: String,
}

/// Fields of a WFDB-style header that the pipeline uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub id: String,
    pub n_leads: usize,
    pub fs: u32,
    pub n_samples: usize,
    pub leads: Vec<LeadInfo>,
    /// Diagnostic codes in file order.
    pub codes: Vec<String>,
}

pub const DEFAULT_GAIN: f64 = 1000.0;

fn num<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, IoError> {
    // WFDB allows suffixes such as `500/...` on the rate field
    let head = field.split('/').next().unwrap_or(field);
    head.parse()
        .map_err(|_| IoError::MalformedHeader(format!("{what} {field:?} is not a number")))
}

fn parse_gain(field: Option<&&str>) -> Result<f64, IoError> {
    let Some(f) = field else {
        return Ok(DEFAULT_GAIN);
    };
    let head = f.split(['/', '(']).next().unwrap_or(f);
    if head.is_empty() {
        return Ok(DEFAULT_GAIN);
    }
    let g: f64 = head
        .parse()
        .map_err(|_| IoError::MalformedHeader(format!("gain {f:?} is not a number")))?;
    Ok(if g > 0.0 { g } else { DEFAULT_GAIN })
}

/// Parse the record line, one line per lead, and `#Dx:` comment.
pub fn parse_header(text: &str) -> Result<Header, IoError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines
        .by_ref()
        .find(|l| !l.starts_with('#'))
        .ok_or_else(|| IoError::MalformedHeader("empty header".into()))?;
    let f: Vec<&str> = first.split_whitespace().collect();
    if f.len() < 4 {
        return Err(IoError::MalformedHeader(format!(
            "record line needs 4 fields, found {}",
            f.len()
        )));
    }
    let id = f[0].to_string();
    let n_leads: usize = num(f[1], "lead count")?;
    let fs: u32 = num(f[2], "sampling rate")?;
    let n_samples: usize = num(f[3], "sample count")?;
    if n_leads == 0 || fs == 0 {
        return Err(IoError::MalformedHeader("lead count and rate must be positive".into()));
    }

    let mut leads = Vec::with_capacity(n_leads);
    let mut codes = None;
    for line in lines {
        if let Some(comment) = line.strip_prefix('#') {
            let c = comment.trim();
            if let Some(rest) = c.strip_prefix("Dx:") {
                codes = Some(
                    rest.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect::<Vec<_>>(),
                );
            }
            continue;
        }
        if leads.len() == n_leads {
            continue;
        }
        let lf: Vec<&str> = line.split_whitespace().collect();
        leads.push(LeadInfo {
            file: lf[0].to_string(),
            gain: parse_gain(lf.get(2))?,
            name: if lf.len() > 8 {
                lf[8..].join(" ")
            } else {
                String::new()
            },
        });
    }
    if leads.len() != n_leads {
        return Err(IoError::MalformedHeader(format!(
            "{n_leads} leads declared, {} lead lines",
            leads.len()
        )));
    }
    let codes = match codes {
        Some(c) if !c.is_empty() => c,
        _ => return Err(IoError::MissingDx),
    };
    Ok(Header {
        id,
        n_leads,
        fs,
        n_samples,
        leads,
        codes,
    })
}

/// Render a header that [`parse_header`] reads back unchanged.
pub fn emit_header(h: &Header) -> String {
    let mut out = format!("{} {} {} {}\n", h.id, h.n_leads, h.fs, h.n_samples);
    for l in &h.leads {
        out.push_str(&format!(
            "{} 16 {}/mV 16 0 0 0 0 {}\n",
            l.file, l.gain, l.name
        ));
    }
    out.push_str(&format!("#Dx: {}\n", h.codes.join(",")));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CPSC: &str = "A0001 12 500 7500 05-Feb-2020 11:39:16
A0001.mat 16+24 1000/mV 16 0 28 -1716 0 I
A0001.mat 16+24 1000/mV 16 0 7 2029 0 II
A0001.mat 16+24 1000/mV 16 0 -21 3745 0 III
A0001.mat 16+24 1000/mV 16 0 -17 3680 0 aVR
A0001.mat 16+24 1000/mV 16 0 24 -2664 0 aVL
A0001.mat 16+24 1000/mV 16 0 -7 -1499 0 aVF
A0001.mat 16+24 1000/mV 16 0 -290 390 0 V1
A0001.mat 16+24 1000/mV 16 0 -204 157 0 V2
A0001.mat 16+24 1000/mV 16 0 -96 -2555 0 V3
A0001.mat 16+24 1000/mV 16 0 -112 49 0 V4
A0001.mat 16+24 1000/mV 16 0 -596 -321 0 V5
A0001.mat 16+24 1000/mV 16 0 -16 -3112 0 V6
#Age: 74
#Sex: Male
#Dx: 426783006
#Rx: Unknown
";

    #[test]
    fn cpsc_style_header() {
        let h = parse_header(CPSC).unwrap();
        assert_eq!(
            (h.id.as_str(), h.n_leads, h.fs, h.n_samples),
            ("A0001", 12, 500, 7500)
        );
        assert_eq!(h.codes, vec!["426783006"]);
        assert_eq!(h.leads[0].name, "I");
        assert_eq!(h.leads[11].gain, 1000.0);
    }

    #[test]
    fn two_codes_keep_order() {
        let h = parse_header("X 1 250 10\nX.dat 16 200/mV\n#Dx: 59118001,164884008\n").unwrap();
        assert_eq!(h.codes, vec!["59118001", "164884008"]);
        assert_eq!(h.leads[0].gain, 200.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_header("A 12 500\n"),
            Err(IoError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_header("A x 500 10\n"),
            Err(IoError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_header("A 1 500 10\nA.dat 16\n#Age: 3\n"),
            Err(IoError::MissingDx)
        ));
        assert!(matches!(
            parse_header("A 2 500 10\nA.dat 16\n#Dx: 1\n"),
            Err(IoError::MalformedHeader(_))
        ));
    }
}
