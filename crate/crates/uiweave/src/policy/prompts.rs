//! Prompt templates, shipped verbatim. Slot markers are replaced literally;
//! everything else is byte-stable so renders can be golden-snapshotted.

use std::collections::BTreeMap;

use super::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    ActionGen,
    Verification,
    ValidateSelect,
    ValidateProcess,
    ValidateJudge,
    PageDesign,
    CodeGen,
    InteractiveCodeGen,
}

pub const ACTION_GEN: &str = r#"You are an interactive web assistant. I now want to check whether all interactive buttons on this webpage work properly. For example, if there is a search box on the page, please search with a reasonable query and click confirm, expecting the page to change. Note that if multiple interactive components are almost identical, please select only one of them. For example, if the page has multiple similar items each with an "Edit" button, please choose only once.

The current page state is part of the detection process. I will send you which components have already been clicked. If you find that an image was clicked before, please focus on what is different in the image I send you this time compared with the previous one. For example, if a new window has popped up, please make sure to only select interactive components in the new part. If you find that the image I send you this time is almost identical to one of the historical ones (for example, all buttons are the same, with only minor text differences), then directly reply with: "All operations on this page are completed".

Note: If two interactive buttons are not sequentially related (for example, two separate click buttons on the same page), please include only one in each boxed response, separating them. If they are sequentially related (for example, entering multiple values and then clicking confirm), please put them together in the same boxed response. Wrap your answers in LaTeX using \boxed{}.

Action Format:
- click[id] = click
- enter[id][text] = input text
- select[id][text] = select option
Separate each action with a comma.

DOM elements clicked previously:
{history_info_prompt}

Important: Please return only the answer! Do not include anything extra!

Page Information:
{domtree}
"#;

pub const VERIFICATION: &str = r#"You will receive multiple webpage images as part of the verification process for interaction history.
The multiple webpage images are arranged in chronological order: the last image represents the completion of the interaction, and the first image is the starting image.
A screenshot is taken after each operation until the final image completes the operation.

For example, if there are only two images, then only one operation was performed:
the pre-operation screenshot is the first image, and the post-operation screenshot is the second image.
If there are four images, then three operations were performed: the pre-operation screenshot is the first image, after the first operation is the second image, after the second operation is the third image, and so on.

Tasks:
1. Interaction Consistency Check:
Determine whether the webpage shows changes consistent with the described interactive components after this interaction sequence.
For example, clicking "Edit" should open an editing window; entering values and clicking "Save" should persist changes; clicking "Cancel" or "Close" should not.
Carefully compare the final and initial images to infer whether the expected modification occurred.
Reply "Yes" if changes are functionally correct, or "No" if the images remain largely unchanged.
Extract your final answer and place it inside LaTeX \boxed{}, followed by your reasoning.

2. Continuation Check:
Compare the last image with the starting image to determine whether any new significant part has appeared on the webpage.
If new interactive content appears and further checking is needed, wrap "Continue" with \terminate{Continue}.
If no new meaningful change is observed (e.g., no new section or trivial modifications), wrap "Complete" with \terminate{Complete}.
Both boxed answers and termination tags must be output, with detailed reasoning provided afterward.

Interactive Action / Component Name:
<interact_element_names>
"#;

pub const VALIDATE_SELECT: &str = r#"You are an interactive web assistant. I now want to check whether certain interactive buttons on this webpage are working properly.
I will give you several tasks. You need to read the current page and select an action sequence for each task.
If you think the current page content is insufficient to complete a task, please only select the interactive components on the page that can accomplish part of the task.

Wrap each of your interactive components in LaTeX \boxed{}.
Action format: click[id] = click, enter[id][text] = input, select[id][text] = select option.
Separate each action with a comma. Please note, id refers to the identifier of this component in the DOM tree.

At the same time, before each \boxed{}, write \task{<task name>},
and after each \boxed{}, write \state{Complete} or \state{Continue}.

Task list: {str(tasks)}
Page information: {domtree}
"#;

pub const VALIDATE_PROCESS: &str = r#"You are an interactive web assistant. I now want you to complete a task.
You are currently in the detection process. Please read which buttons have already been clicked on the historical pages.
Only select the buttons on the page that can actually be clicked.
You should focus only on completing one task. Read the current page and select an ongoing action sequence for the current task.
If you think the current page content is insufficient to complete the task, please only select the interactive components on the page that can accomplish part of the task.

Wrap your interactive components with a LaTeX \boxed{}.
Action format: click[id] = click, enter[id][text] = input, select[id][text] = select option.
Separate each action with a comma.

At the same time, before each \boxed{}, write \task{<task name>},
and after each \boxed{}, write \state{Complete} or \state{Continue}.

Task content: {task_text}
Page information: {domtree}
"#;

pub const VALIDATE_JUDGE: &str = r#"Provide all the screenshots along this path (in chronological order).
Task: {task_text}

Please determine whether the expected webpage changes for this task have been completed.
Important: Each task name corresponds to a single interactive button or operation.
For example, "New" only represents opening the new page, not saving.
Thus, you only need to verify whether the new page can be opened.
Only if the task explicitly specifies "New - Input ... - Save" do you need to confirm the saving step.
Similarly, "Delete" only refers to opening the delete dialog, while "Delete - Confirm Delete" represents two operations - only in the latter case should you check whether the deletion was actually completed.

If the operation has been successfully completed, respond with \boxed{Yes};
if not completed, respond with \boxed{No}.
Afterward, briefly explain your reasoning.
"#;

pub const PAGE_DESIGN: &str = r#"Please write a detailed prompt that will be used to instruct a text-to-image model to generate an interactive webpage HTML code with the theme "<INSERT THEME FROM THEME LIST>".

Specific Requirements:
1. The webpage content should revolve around the specified theme and include a wide variety of theme-related modules.
2. The webpage must contain multiple interactive elements, limited to buttons, input fields, and dropdown selectors. Each interactive component should cause corresponding and reasonable changes on the webpage.
3. The webpage content should be rich, detailed, and contextually diverse.
4. The output should only contain the final prompt for the AI to generate the webpage - without explanations, metadata, or additional commentary.
"#;

pub const CODE_GEN: &str = r#"You are a web development expert highly sensitive to details and interaction experience, proficient in React and Tailwind CSS.
Please generate a highly interactive single-page application with reasonable layout and rich content for the specified theme according to the following requirements.

Basic Requirements:
1. Generate a complete interactive single-page website rendered using React (v18) and Tailwind CSS (v3+).
2. Return only the full source code wrapped within <html>...</html> tags. Do not include markdown wrappers, explanations, or code comments.
3. Must include the following dependencies:
<script src="https://cdn.jsdelivr.net/npm/react@18.0.0/umd/react.development.js"></script>
<script src="https://cdn.jsdelivr.net/npm/react-dom@18.0.0/umd/react-dom.development.js"></script>
<script src="https://cdn.jsdelivr.net/npm/@babel/standalone/babel.js"></script>
<script src="https://cdn.tailwindcss.com"></script>
<link rel="stylesheet" href="https://cdnjs.cloudflare.com/ajax/libs/font-awesome/5.15.3/css/all.min.css"></link>

Interactivity and Functional Areas:
1. All interactive components (input, button, select) must trigger meaningful updates to the rendered page.
2. For editable content, use modals, dropdowns, or input forms with complete validation.
3. Use real pictures from https://picsum.photos/. Each image must have a fixed URL and remain constant across reloads.

Page Structure and Layout:
1. Include logical partitions (navigation, sidebar, main content, etc.) referencing modern app layouts.
2. Ensure all sections are populated; empty placeholders are not allowed.
3. The visual style must match the assigned theme (e.g., business, minimalism, tech, lifestyle).

Notes:
- Do not output explanations or text outside the code.
- Ensure all theme-related UI logic is complete and intuitive.

Webpage Description: <INSERT DETAILED PROMPT FROM STAGE 1>
"#;

pub const INTERACTIVE_CODE_GEN: &str = r#"You are highly skilled at building interactive webpages with React and Tailwind, and can precisely reconstruct a complete HTML interactive webpage based on multiple webpage screenshots provided by the user.

Initial Interface Requirements:
1. Build the page strictly according to the first webpage screenshot provided by the user. It must be exactly the same as the first screenshot you receive.
2. Do not miss any details. Background colors, fonts, font sizes, spacing, borders, icons, and text must strictly match the screenshot.
3. Every line of text in the screenshot must be presented verbatim.
4. For images, please use real pictures from the https://picsum.photos/ library, with URLs like https://picsum.photos/id/.../.../... Each image must explicitly list its URL. Do not use reusable image components. Each webpage component's image URL must be fixed and must not be randomly regenerated each time.

Task Requirements:
1. The user will send you multiple images. Each image represents a screenshot of the webpage after a single interactive operation, and all images together represent the screenshots resulting from all operations performed on this page.
2. The user will send you a detailed operation-sequence list. Each item in the list represents one operation sequence and will tell you which image (by index in the images you received) is the starting image (the page before the operation), and which images correspond to the sequence of screenshots after each step in the operation. Locate these images yourself. An operation sequence may include multiple operations, i.e., it may span multiple images. Some operation sequences have many intermediate steps, but among the images only the first and the last are provided - identify the specific operation content yourself.
3. After locating these images, read the operation description for that item. There are three types of operations: "input," "click," and "select." Correctly identify which interactive component in the screenshots corresponds to each operation, and implement them correctly in the generated HTML webpage.
4. All interactive operations given to you must be perfectly replicated in the generated HTML, meaning they must be fully functional, and once completed, the page must match the corresponding screenshots.

Library Requirements:
<script src="https://cdn.jsdelivr.net/npm/react@18.0.0/umd/react.development.js"></script>
<script src="https://cdn.jsdelivr.net/npm/react-dom@18.0.0/umd/react-dom.development.js"></script>
<script src="https://cdn.jsdelivr.net/npm/@babel/standalone/babel.js"></script>
<script src="https://cdn.tailwindcss.com"></script>
<link rel="stylesheet" href="https://cdnjs.cloudflare.com/ajax/libs/font-awesome/5.15.3/css/all.min.css"></link>
You may use Google Fonts.

Code Output Format:
1. Output only the code within the complete <html></html> tags.
2. Do not add markdown quotes or "html" before or after the code.
"#;

impl TemplateId {
    pub fn body(&self) -> &'static str {
        match self {
            TemplateId::ActionGen => ACTION_GEN,
            TemplateId::Verification => VERIFICATION,
            TemplateId::ValidateSelect => VALIDATE_SELECT,
            TemplateId::ValidateProcess => VALIDATE_PROCESS,
            TemplateId::ValidateJudge => VALIDATE_JUDGE,
            TemplateId::PageDesign => PAGE_DESIGN,
            TemplateId::CodeGen => CODE_GEN,
            TemplateId::InteractiveCodeGen => INTERACTIVE_CODE_GEN,
        }
    }

    /// Slot names and the literal markers they fill.
    pub fn slots(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            TemplateId::ActionGen => &[
                ("history_info_prompt", "{history_info_prompt}"),
                ("domtree", "{domtree}"),
            ],
            TemplateId::Verification => {
                &[("interact_element_names", "<interact_element_names>")]
            }
            TemplateId::ValidateSelect => {
                &[("tasks", "{str(tasks)}"), ("domtree", "{domtree}")]
            }
            TemplateId::ValidateProcess => {
                &[("task_text", "{task_text}"), ("domtree", "{domtree}")]
            }
            TemplateId::ValidateJudge => &[("task_text", "{task_text}")],
            TemplateId::PageDesign => &[("theme", "<INSERT THEME FROM THEME LIST>")],
            TemplateId::CodeGen => &[("description", "<INSERT DETAILED PROMPT FROM STAGE 1>")],
            TemplateId::InteractiveCodeGen => &[],
        }
    }
}

/// Fills every slot of a template from the context; byte-stable for byte-equal
/// inputs. A slot without a context entry is an error, surplus context keys
/// are ignored.
pub fn render_prompt(
    template: TemplateId,
    context: &BTreeMap<&str, String>,
) -> Result<String, PolicyError> {
    let mut body = template.body().to_string();
    for (name, marker) in template.slots() {
        let value = context
            .get(name)
            .ok_or_else(|| PolicyError::MissingSlot((*name).to_string()))?;
        body = body.replace(marker, value);
    }
    Ok(body)
}

/// Python-style list repr used by the task-list slot.
pub fn format_task_list(names: &[String]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    format!("[{}]", quoted.join(", "))
}
