use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SLOT: &str = "{report}";

/// Shipped instruction template; contains the grammar line verbatim.
pub const DEFAULT_TEMPLATE: &str = include_str!("../../data/prompt_template.txt");

/// Line grammar the model is asked to answer in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputGrammar {
    pub delimiter: char,
}

impl Default for OutputGrammar {
    fn default() -> Self {
        Self { delimiter: '|' }
    }
}

impl OutputGrammar {
    /// `severity|location|category` for the default delimiter.
    pub fn describe(&self) -> String {
        let d = self.delimiter;
        format!("severity{d}location{d}category")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub instruction_template: String,
    pub output_grammar: OutputGrammar,
    pub max_triplets: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            instruction_template: DEFAULT_TEMPLATE.to_string(),
            output_grammar: OutputGrammar::default(),
            max_triplets: 16,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        let slots = self.instruction_template.matches(REPORT_SLOT).count();
        if slots != 1 {
            return Err(Error::PromptConfig(format!(
                "instruction_template must contain exactly one {REPORT_SLOT} slot, found {slots}"
            )));
        }
        if self.max_triplets == 0 {
            return Err(Error::PromptConfig("max_triplets must be positive".into()));
        }
        Ok(())
    }
}

/// Substitute the report into the template's single slot.
pub fn build_prompt(report_text: &str, config: &PromptConfig) -> Result<String> {
    config.validate()?;
    if report_text.trim().is_empty() {
        return Err(Error::EmptyReport);
    }
    let (head, tail) = config
        .instruction_template
        .split_once(REPORT_SLOT)
        .expect("validated slot");
    Ok(format!("{head}{report_text}{tail}"))
}
