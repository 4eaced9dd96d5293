use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    CodeChanges,
    TestChanges,
    BuildAndConfig,
    SupportingProcesses,
    None,
}

/// Migration commit categories. Numbers are stable; `Uncategorized` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Uncategorized,
    PlatformSpecificConditionals,
    DataRepresentation,
    IntrinsicsAndVectorCode,
    MemoryModel,
    PerformanceOptimization,
    TestFixes,
    TestExecutionEnvironment,
    BuildAndConfigFiles,
    ReleaseAndRolloutConfig,
    SchedulingAndProvisioning,
    BuildTestInfrastructure,
    MigrationTooling,
    MonitoringAndDashboards,
    CodeCleanupDeprecation,
    HardwarePlatformEnablement,
    Documentation,
}

impl Category {
    /// All 17 values in number order, `Uncategorized` first.
    pub const ALL: [Category; 17] = [
        Category::Uncategorized,
        Category::PlatformSpecificConditionals,
        Category::DataRepresentation,
        Category::IntrinsicsAndVectorCode,
        Category::MemoryModel,
        Category::PerformanceOptimization,
        Category::TestFixes,
        Category::TestExecutionEnvironment,
        Category::BuildAndConfigFiles,
        Category::ReleaseAndRolloutConfig,
        Category::SchedulingAndProvisioning,
        Category::BuildTestInfrastructure,
        Category::MigrationTooling,
        Category::MonitoringAndDashboards,
        Category::CodeCleanupDeprecation,
        Category::HardwarePlatformEnablement,
        Category::Documentation,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Category> {
        Self::ALL.get(n as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Uncategorized => "Uncategorized",
            Category::PlatformSpecificConditionals => "PlatformSpecificConditionals",
            Category::DataRepresentation => "DataRepresentation",
            Category::IntrinsicsAndVectorCode => "IntrinsicsAndVectorCode",
            Category::MemoryModel => "MemoryModel",
            Category::PerformanceOptimization => "PerformanceOptimization",
            Category::TestFixes => "TestFixes",
            Category::TestExecutionEnvironment => "TestExecutionEnvironment",
            Category::BuildAndConfigFiles => "BuildAndConfigFiles",
            Category::ReleaseAndRolloutConfig => "ReleaseAndRolloutConfig",
            Category::SchedulingAndProvisioning => "SchedulingAndProvisioning",
            Category::BuildTestInfrastructure => "BuildTestInfrastructure",
            Category::MigrationTooling => "MigrationTooling",
            Category::MonitoringAndDashboards => "MonitoringAndDashboards",
            Category::CodeCleanupDeprecation => "CodeCleanupDeprecation",
            Category::HardwarePlatformEnablement => "HardwarePlatformEnablement",
            Category::Documentation => "Documentation",
        }
    }

    /// Accepts the name or the number.
    pub fn parse(s: &str) -> Option<Category> {
        let s = s.trim();
        match s.parse::<u8>() {
            Ok(n) => Self::from_number(n),
            Err(_) => Self::ALL.into_iter().find(|c| c.as_str() == s),
        }
    }

    pub fn group(self) -> Group {
        match self.number() {
            1..=5 => Group::CodeChanges,
            6..=7 => Group::TestChanges,
            8..=10 => Group::BuildAndConfig,
            11..=16 => Group::SupportingProcesses,
            _ => Group::None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
