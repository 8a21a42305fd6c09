//! Systems bundled with the crate.

use crate::config::parse_system;
use crate::system::SystemDefinition;

pub struct Fixture {
    pub name: &'static str,
    pub file_name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
    pub system: SystemDefinition,
}

const SOURCES: [(&str, &str, &str, &str); 4] = [
    (
        "sys_a",
        "sys_a.ini",
        "supercritical super-explosion at the corner",
        include_str!("../fixtures/sys_a.ini"),
    ),
    (
        "sys_b",
        "sys_b.ini",
        "nonsmooth Hopf with a canard explosion",
        include_str!("../fixtures/sys_b.ini"),
    ),
    (
        "sys_c",
        "sys_c.ini",
        "smooth Hopf on the left branch",
        include_str!("../fixtures/sys_c.ini"),
    ),
    (
        "sys_d",
        "sys_d.ini",
        "subcritical super-explosion with bistability",
        include_str!("../fixtures/sys_d.ini"),
    ),
];

pub fn all() -> Vec<Fixture> {
    SOURCES
        .iter()
        .map(|&(name, file_name, summary, source)| Fixture {
            name,
            file_name,
            summary,
            source,
            system: parse_system(source).expect("bundled fixtures parse"),
        })
        .collect()
}

pub fn by_name(name: &str) -> Option<Fixture> {
    let stem = name.strip_suffix(".ini").unwrap_or(name);
    all().into_iter().find(|f| f.name == stem)
}

fn load(name: &str) -> SystemDefinition {
    by_name(name).expect("fixture exists").system
}

pub fn sys_a() -> SystemDefinition {
    load("sys_a")
}

pub fn sys_b() -> SystemDefinition {
    load("sys_b")
}

pub fn sys_c() -> SystemDefinition {
    load("sys_c")
}

pub fn sys_d() -> SystemDefinition {
    load("sys_d")
}
