/** The annotator-facing instruction text, kept in one place so wording can
 * be edited without touching rendering code. */

export const INSTRUCTIONS = {
  title: "Which option looks more similar to the reference?",
  body:
    "You will see a reference color swatch on top and two options, A and B, " +
    "below it. Pick the option that looks more similar to the reference. " +
    "There is no “equal” answer: if they seem close, go with your " +
    "first impression. Click a swatch or use the keyboard: left arrow " +
    "chooses A, right arrow chooses B.",
  optionA: "Option A",
  optionB: "Option B",
  reference: "Reference",
  done: "All questions in this task are answered. Thank you!",
  noWork: "No more questions are available for you right now.",
  conflict: "That question was already answered elsewhere; moving on.",
  offline: "Could not reach the service.",
  retry: "Retry",
} as const;
