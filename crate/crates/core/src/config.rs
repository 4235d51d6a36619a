//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::converter_schedule;
use crate::error::{Error, Result};
use crate::gates::{sequential_schedule, GateSchedule};
use crate::regulator::{RegulatorConfig, SensingChain};
use crate::spec::{ConverterSpec, LossParams, DEFAULT_C_OUT};
use crate::topology::firing_order;

pub const DEFAULT_GAP_FRACTION: f64 = 0.01;

const PRESETS: &[(&str, &str)] = &[
    ("table1.cfg", include_str!("../presets/table1.cfg")),
    (
        "table1-d215.cfg",
        include_str!("../presets/table1-d215.cfg"),
    ),
    (
        "eightphase-400.cfg",
        include_str!("../presets/eightphase-400.cfg"),
    ),
    (
        "eightphase-800.cfg",
        include_str!("../presets/eightphase-800.cfg"),
    ),
    (
        "fourphase-800.cfg",
        include_str!("../presets/fourphase-800.cfg"),
    ),
    (
        "anomaly-d70.cfg",
        include_str!("../presets/anomaly-d70.cfg"),
    ),
];

/// Names and contents of the built-in scenario files.
pub fn presets() -> &'static [(&'static str, &'static str)] {
    PRESETS
}

pub fn preset(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    PRESETS
        .iter()
        .find(|(n, _)| n.strip_suffix(".cfg") == Some(name))
        .map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PwmMode {
    Interleaved,
    /// One switch at a time with `gap` of the period off between them.
    Sequential {
        gap: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSettings {
    pub chain: SensingChain,
    pub config: RegulatorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub spec: ConverterSpec,
    pub pwm: PwmMode,
    /// Gap subtracted from `2/N` for the regulator's duty ceiling.
    pub gap_fraction: f64,
    pub regulator: Option<RegulatorSettings>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Keys that were filled from defaults, in file-key order.
    pub defaulted: Vec<&'static str>,
}

impl Scenario {
    /// Gate schedule implied by the PWM mode.
    pub fn schedule(&self) -> Result<GateSchedule> {
        match self.pwm {
            PwmMode::Interleaved => converter_schedule(&self.spec),
            PwmMode::Sequential { gap } => {
                sequential_schedule(self.spec.phases, gap, self.spec.fsw)?
                    .with_firing_order(&firing_order(self.spec.phases))
            }
        }
    }

    /// Every parameter with its value, defaults marked.
    pub fn header(&self) -> String {
        let s = &self.spec;
        let l = &s.losses;
        let mut out = String::new();
        let mut line = |key: &'static str, value: String| {
            let mark = if self.defaulted.contains(&key) {
                "  (default)"
            } else {
                ""
            };
            writeln!(out, "# {key} = {value}{mark}").expect("string write");
        };
        line("name", self.name.clone());
        line("phases", s.phases.to_string());
        line("vin", format!("{}", s.vin));
        line("fsw", format!("{}", s.fsw));
        line("duty", format!("{}", s.duty));
        line(
            "pwm_mode",
            match self.pwm {
                PwmMode::Interleaved => "interleaved".into(),
                PwmMode::Sequential { .. } => "sequential".into(),
            },
        );
        line("gap_fraction", format!("{}", self.gap_fraction));
        line("l_phase", format!("{:e}", s.l_phase));
        line("l_out", format!("{:e}", s.l_out));
        line("c_in", format!("{:e}", s.c_in));
        line("c_block", format!("{:e}", s.c_block));
        line("c_out", format!("{:e}", s.c_out));
        line("load_ohms", format!("{}", s.load_ohms));
        line("r_switch_on", format!("{}", l.r_switch_on));
        line("v_diode", format!("{}", l.v_diode));
        line("r_diode_on", format!("{}", l.r_diode_on));
        line("r_inductor", format!("{}", l.r_inductor));
        line("r_cap", format!("{}", l.r_cap));
        line("r_off", format!("{}", l.r_off));
        line("allow_invalid", s.allow_invalid_duty.to_string());
        if let Some(r) = &self.regulator {
            line("vo_target", format!("{}", r.config.vo_target));
            line("divider_ratio", format!("{}", r.chain.divider_ratio));
            line("adc_bits", r.chain.adc_bits.to_string());
            line("full_scale", format!("{}", r.chain.full_scale));
            line("update_period", r.chain.update_period.to_string());
            line("duty_min", format!("{}", r.config.duty_min));
            line("duty_max", format!("{}", r.config.duty_max));
            line("trim_gain", format!("{}", r.config.trim_gain));
        }
        out
    }
}

const KEYS: &[&str] = &[
    "name",
    "phases",
    "vin",
    "fsw",
    "duty",
    "pwm_mode",
    "gap_fraction",
    "l_phase",
    "l_out",
    "c_in",
    "c_block",
    "c_out",
    "load_ohms",
    "r_switch_on",
    "v_diode",
    "r_diode_on",
    "r_inductor",
    "r_cap",
    "r_off",
    "allow_invalid",
    "vo_target",
    "divider_ratio",
    "adc_bits",
    "full_scale",
    "update_period",
    "duty_min",
    "duty_max",
    "trim_gain",
    "out",
    "svg",
];

struct Entries<'a> {
    source: &'a str,
    values: BTreeMap<&'static str, (usize, String)>,
    defaulted: Vec<&'static str>,
}

impl Entries<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Config {
            source_name: self.source.to_string(),
            line,
            message: message.into(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.values.get(key)
    }

    fn number(&mut self, key: &'static str, default: Option<f64>) -> Result<f64> {
        match self.values.get(key) {
            Some((line, text)) => text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| self.err(*line, format!("{key}: `{text}` is not a number"))),
            None => match default {
                Some(v) => {
                    self.defaulted.push(key);
                    Ok(v)
                }
                None => Err(self.err(0, format!("missing required key `{key}`"))),
            },
        }
    }

    fn integer(&mut self, key: &'static str, default: Option<u64>) -> Result<u64> {
        match self.values.get(key) {
            Some((line, text)) => text.parse::<u64>().map_err(|_| {
                self.err(
                    *line,
                    format!("{key}: `{text}` is not a non-negative integer"),
                )
            }),
            None => match default {
                Some(v) => {
                    self.defaulted.push(key);
                    Ok(v)
                }
                None => Err(self.err(0, format!("missing required key `{key}`"))),
            },
        }
    }

    fn flag(&mut self, key: &'static str) -> Result<bool> {
        match self.values.get(key) {
            Some((line, text)) => match text.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(self.err(
                    *line,
                    format!("{key}: expected true or false, got `{text}`"),
                )),
            },
            None => {
                self.defaulted.push(key);
                Ok(false)
            }
        }
    }
}

/// Parse scenario text; `source` names it in diagnostics.
pub fn parse_config(text: &str, source: &str) -> Result<Scenario> {
    parse_config_with(text, source, false)
}

/// As [`parse_config`]; `allow_invalid` forces the duty-bound override on.
pub fn parse_config_with(text: &str, source: &str, allow_invalid: bool) -> Result<Scenario> {
    let mut entries = Entries {
        source,
        values: BTreeMap::new(),
        defaulted: Vec::new(),
    };
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(entries.err(line, format!("expected `key = value`, got `{content}`")));
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(entries.err(line, format!("unknown key `{key}`")));
        };
        if value.is_empty() {
            return Err(entries.err(line, format!("{key}: missing value")));
        }
        if let Some((first, _)) = entries.values.get(known) {
            return Err(entries.err(
                line,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
        entries.values.insert(known, (line, value.to_string()));
    }

    let phases_line = entries.line_of("phases");
    let phases = entries.integer("phases", None)? as usize;
    if phases < 4 || phases % 2 != 0 {
        return Err(entries.err(
            phases_line,
            format!("phases must be even >= 4, got {phases}"),
        ));
    }
    let pwm_line = entries.line_of("pwm_mode");
    let sequential = match entries.raw("pwm_mode").map(|(_, v)| v.as_str()) {
        None => {
            entries.defaulted.push("pwm_mode");
            false
        }
        Some("interleaved") => false,
        Some("sequential") => true,
        Some(other) => {
            return Err(entries.err(
                pwm_line,
                format!("pwm_mode must be interleaved or sequential, got `{other}`"),
            ))
        }
    };
    let gap_fraction = entries.number("gap_fraction", Some(DEFAULT_GAP_FRACTION))?;
    let duty = if sequential {
        if entries.raw("duty").is_some() {
            return Err(entries.err(
                entries.line_of("duty"),
                "duty is derived from gap_fraction in sequential mode; remove it",
            ));
        }
        if !(0.0..1.0 / phases as f64).contains(&gap_fraction) {
            return Err(entries.err(
                entries.line_of("gap_fraction"),
                format!("gap_fraction must lie in [0, 1/{phases}) in sequential mode"),
            ));
        }
        1.0 / phases as f64 - gap_fraction
    } else {
        entries.number("duty", None)?
    };

    let table1 = ConverterSpec::table1(0.25);
    let ideal = LossParams::ideal();
    let spec = ConverterSpec {
        phases,
        vin: entries.number("vin", None)?,
        fsw: entries.number("fsw", None)?,
        duty,
        l_phase: entries.number("l_phase", Some(table1.l_phase))?,
        l_out: entries.number("l_out", Some(table1.l_out))?,
        c_in: entries.number("c_in", Some(table1.c_in))?,
        c_block: entries.number("c_block", Some(table1.c_block))?,
        c_out: entries.number("c_out", Some(DEFAULT_C_OUT))?,
        load_ohms: entries.number("load_ohms", None)?,
        losses: LossParams {
            r_switch_on: entries.number("r_switch_on", Some(ideal.r_switch_on))?,
            v_diode: entries.number("v_diode", Some(ideal.v_diode))?,
            r_diode_on: entries.number("r_diode_on", Some(ideal.r_diode_on))?,
            r_inductor: entries.number("r_inductor", Some(ideal.r_inductor))?,
            r_cap: entries.number("r_cap", Some(ideal.r_cap))?,
            r_off: entries.number("r_off", Some(ideal.r_off))?,
        },
        allow_invalid_duty: entries.flag("allow_invalid")? || allow_invalid,
    };
    if let Err(Error::InvalidSpec(message)) = spec.validate() {
        let key = KEYS
            .iter()
            .find(|k| message.starts_with(*k) || message.contains(&format!("{k} ")))
            .copied()
            .unwrap_or("duty");
        return Err(entries.err(entries.line_of(key), message));
    }

    let regulator = if entries.raw("vo_target").is_some() {
        let defaults = SensingChain::default();
        let chain = SensingChain {
            divider_ratio: entries.number("divider_ratio", Some(defaults.divider_ratio))?,
            adc_bits: entries.integer("adc_bits", Some(defaults.adc_bits as u64))? as u32,
            full_scale: entries.number("full_scale", Some(defaults.full_scale))?,
            update_period: entries.integer("update_period", Some(defaults.update_period as u64))?
                as usize,
        };
        let vo_target = entries.number("vo_target", None)?;
        let base = RegulatorConfig::new(phases, vo_target, gap_fraction);
        let config = RegulatorConfig {
            vo_target,
            duty_min: entries.number("duty_min", Some(base.duty_min))?,
            duty_max: entries.number("duty_max", Some(base.duty_max))?,
            trim_gain: entries.number("trim_gain", Some(0.0))?,
        };
        let line = entries.line_of("vo_target");
        chain
            .validate()
            .map_err(|e| entries.err(line, e.to_string()))?;
        config
            .validate(phases)
            .map_err(|e| entries.err(line, e.to_string()))?;
        chain.check_range(spec.vin).map_err(|e| {
            entries.err(
                line,
                format!("{e}; set divider_ratio or full_scale so that divider_ratio * full_scale >= vin"),
            )
        })?;
        Some(RegulatorSettings { chain, config })
    } else {
        for key in [
            "divider_ratio",
            "adc_bits",
            "full_scale",
            "update_period",
            "duty_min",
            "duty_max",
            "trim_gain",
        ] {
            if entries.raw(key).is_some() {
                return Err(entries.err(entries.line_of(key), format!("{key} needs vo_target")));
            }
        }
        None
    };

    let name = entries
        .raw("name")
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| {
            source
                .rsplit('/')
                .next()
                .unwrap_or(source)
                .trim_end_matches(".cfg")
                .to_string()
        });
    let out = entries.raw("out").map(|(_, v)| PathBuf::from(v));
    let svg = entries.raw("svg").map(|(_, v)| PathBuf::from(v));
    Ok(Scenario {
        name,
        spec,
        pwm: if sequential {
            PwmMode::Sequential { gap: gap_fraction }
        } else {
            PwmMode::Interleaved
        },
        gap_fraction,
        regulator,
        out,
        svg,
        defaulted: entries
            .defaulted
            .into_iter()
            .filter(|k| !(allow_invalid && *k == "allow_invalid"))
            .collect(),
    })
}

/// Load a scenario file. A path that does not exist but names a built-in
/// preset (for example `table1.cfg`) loads the preset.
pub fn load_config(path: &Path) -> Result<Scenario> {
    load_config_with(path, false)
}

pub fn load_config_with(path: &Path, allow_invalid: bool) -> Result<Scenario> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_config_with(&text, &path.display().to_string(), allow_invalid),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            match preset(name) {
                Some(text) if path.parent().is_none_or(|p| p.as_os_str().is_empty()) => {
                    parse_config_with(text, name, allow_invalid)
                }
                _ => Err(Error::Config {
                    source_name: path.display().to_string(),
                    line: 0,
                    message: "file not found".into(),
                }),
            }
        }
        Err(e) => Err(e.into()),
    }
}
