//! Sentences that must never be taken for voice commands.

#![allow(dead_code)]

/// Ordinary answers a user might give to drafting questions.
pub const ORDINARY_ANSWERS: [&str; 50] = [
    "It is an invitation to my sister's birthday dinner.",
    "The dinner is on Friday at seven in the evening.",
    "We are meeting at the Italian place on Main Street.",
    "Please bring a small gift if you want to.",
    "My manager asked for a status update on the migration.",
    "The database work is about eighty percent done.",
    "We found two bugs in the billing module last week.",
    "I would like the tone to be friendly but professional.",
    "The email goes to the whole design team.",
    "Tell them the deadline moved to the end of March.",
    "I am sorry for the late reply to your message.",
    "Thank you for the detailed feedback on the proposal.",
    "I can attend the workshop but only in the morning.",
    "The budget for the offsite is around five thousand dollars.",
    "Parking is free behind the community center.",
    "Lunch will be provided for everyone who signs up.",
    "The museum opens at ten and closes at six.",
    "My name is Jordan and I coordinate the volunteers.",
    "We need three more people for the Saturday shift.",
    "The kids can come along, there is a play area.",
    "I want to thank Maria for organizing the fundraiser.",
    "The report should be under two pages long.",
    "Our flight lands at noon on Tuesday.",
    "I prefer a video call over a phone call.",
    "The new hire starts on the first of the month.",
    "Dress code is casual, jeans are fine.",
    "We are celebrating ten years of the company.",
    "The printer on the third floor is broken again.",
    "I need the signed contract back by Thursday.",
    "My address changed to 42 Elm Road.",
    "Can we move our weekly sync to Wednesday afternoon?",
    "The recipe needs two cups of flour and one egg.",
    "Traffic was terrible so I arrived late.",
    "I enjoyed the conference talk about gardening.",
    "She will present the quarterly numbers herself.",
    "The landlord agreed to fix the heating.",
    "We should book the venue before prices go up.",
    "I am allergic to peanuts so please check the menu.",
    "The team picnic will be at Riverside Park.",
    "Everyone should bring a water bottle and sunscreen.",
    "The package arrived damaged and I want a refund.",
    "I think the second option is cheaper overall.",
    "Our neighbor offered to water the plants.",
    "The school concert starts at half past five.",
    "He asked whether the library is open on Sunday.",
    "I will send the slides right after the meeting.",
    "We raised almost two thousand dollars for the shelter.",
    "The hiking trail is about eight kilometers long.",
    "Please confirm if you can join us for brunch.",
    "I really appreciate your help with the move.",
];
