"""Row-by-row transcription of the published object/region relation tables.

Kept separate from the shipped triples file so the fidelity test compares two
independent copies.
"""

# object -> (related objects, regions)
OBJECT_ROWS = {
    "bathtub": (
        "towel, sink, shower, picture, cabinet, toilet, counter, table, plant",
        "bathroom",
    ),
    "bed": (
        "chair, picture, table, sink, seating, cushion, cabinet, chest_of_drawers, shower, plant, counter, tv_monitor, towel",
        "spa/sauna, junk, bedroom",
    ),
    "cabinet": (
        "clothes, chair, towel, seating, shower, toilet, picture, table, sink, cushion, plant, sofa, counter, bed, chest_of_drawers, bathtub, tv_monitor, stool, fireplace",
        "spa/sauna, bathroom, familyroom/lounge, living room, entryway/foyer/lobby, kitchen, office, utilityroom/toolroom, other room, hallway, laundryroom/mudroom, closet",
    ),
    "chair": (
        "gym_equipment, picture, seating, cushion, table, plant, cabinet, sink, shower, chest_of_drawers, bed, counter, sofa, towel, tv_monitor, stool, fireplace",
        "spa/sauna, familyroom/lounge, living room, junk, entryway/foyer/lobby, kitchen, office, utilityroom/toolroom, bedroom, other room, rec/game, balcony, lounge, porch/terrace/deck, hallway, dining room, meetingroom/conferenceroom, workout/gym/exercise",
    ),
    "chest_of_drawers": (
        "chair, picture, cushion, table, bed, tv_monitor, cabinet",
        "office, bedroom",
    ),
    "clothes": ("cabinet, picture", "closet"),
    "counter": (
        "towel, cabinet, shower, chair, toilet, picture, sink, cushion, bed, tv_monitor, table, bathtub, plant, stool",
        "bathroom, junk, kitchen, utilityroom/toolroom, laundryroom/mudroom",
    ),
    "cushion": (
        "chair, picture, seating, table, sink, plant, cabinet, shower, chest_of_drawers, bed, sofa, counter, towel, tv_monitor, stool, fireplace",
        "spa/sauna, familyroom/lounge, living room, junk, entryway/foyer/lobby, office, utilityroom/toolroom, bedroom, other room, rec/game, balcony, lounge, porch/terrace/deck",
    ),
    "fireplace": (
        "cushion, table, chair, picture, sofa, plant, stool, cabinet",
        "living room",
    ),
    "gym_equipment": ("picture, chair", "workout/gym/exercise"),
    "picture": (
        "clothes, gym_equipment, toilet, chair, seating, shower, cushion, towel, cabinet, table, sink, chest_of_drawers, bed, counter, plant, sofa, bathtub, tv_monitor, stool, fireplace",
        "spa/sauna, bathroom, familyroom/lounge, living room, junk, entryway/foyer/lobby, kitchen, office, utilityroom/toolroom, bedroom, other room, rec/game, lounge, hallway, laundryroom/mudroom, closet, dining room, meetingroom/conferenceroom, toilet, workout/gym/exercise",
    ),
    "plant": (
        "chair, picture, sink, towel, table, cushion, shower, toilet, seating, cabinet, sofa, counter, bed, bathtub, tv_monitor, stool, fireplace",
        "spa/sauna, bathroom, familyroom/lounge, living room, junk, entryway/foyer/lobby, rec/game, balcony, porch/terrace/deck",
    ),
    "seating": (
        "chair, table, sink, picture, plant, cabinet, shower, bed, cushion, towel",
        "spa/sauna, entryway/foyer/lobby, other room",
    ),
    "shower": (
        "chair, sink, towel, table, toilet, seating, cabinet, picture, counter, bed, plant, bathtub, cushion",
        "spa/sauna, bathroom",
    ),
    "sink": (
        "cabinet, chair, towel, shower, toilet, seating, picture, table, counter, cushion, bed, tv_monitor, plant, bathtub, stool",
        "spa/sauna, bathroom, junk, kitchen, utilityroom/toolroom, laundryroom/mudroom",
    ),
    "sofa": (
        "chair, picture, cushion, table, plant, cabinet, stool, tv_monitor, fireplace",
        "familyroom/lounge, living room, rec/game, balcony, lounge, porch/terrace/deck",
    ),
    "stool": (
        "cushion, chair, picture, table, cabinet, counter, sofa, plant, sink, tv_monitor, fireplace",
        "familyroom/lounge, living room, kitchen",
    ),
    "table": (
        "chair, towel, picture, seating, shower, toilet, cushion, sink, cabinet, plant, bed, chest_of_drawers, counter, sofa, bathtub, tv_monitor, stool, fireplace",
        "spa/sauna, bathroom, familyroom/lounge, living room, entryway/foyer/lobby, kitchen, office, utilityroom/toolroom, bedroom, other room, rec/game, balcony, lounge, porch/terrace/deck, hallway, dining room, meetingroom/conferenceroom",
    ),
    "toilet": (
        "sink, shower, towel, cabinet, picture, counter, bathtub, table, plant",
        "bathroom, toilet",
    ),
    "towel": (
        "toilet, chair, sink, table, shower, seating, cabinet, picture, counter, bed, plant, bathtub, cushion",
        "spa/sauna, bathroom, toilet",
    ),
    "tv_monitor": (
        "chair, picture, table, cushion, sink, plant, sofa, cabinet, counter, bed, chest_of_drawers, stool",
        "familyroom/lounge, junk, office",
    ),
}

# region -> (objects, other regions)
REGION_ROWS = {
    "balcony": ("chair, plant, cushion, table, sofa", "living room, familyroom/lounge, rec/game, porch/terrace/deck"),
    "bathroom": ("towel, sink, shower, picture, cabinet, toilet, counter, bathtub, table, plant", "spa/sauna"),
    "bedroom": ("cushion, picture, chest_of_drawers, bed, chair, table", "spa/sauna, office"),
    "closet": (
        "clothes, cabinet, picture",
        "bathroom, hallway, entryway/foyer/lobby, living room, familyroom/lounge, office, kitchen, laundryroom/mudroom, spa/sauna, other room, utilityroom/toolroom",
    ),
    "dining room": (
        "chair, picture, table",
        "bedroom, hallway, entryway/foyer/lobby, living room, familyroom/lounge, office, kitchen, lounge, rec/game, spa/sauna, other room, utilityroom/toolroom, meetingroom/conferenceroom",
    ),
    "entryway/foyer/lobby": ("picture, chair, table, plant, cabinet, cushion, seating", "spa/sauna"),
    "familyroom/lounge": ("cushion, chair, picture, table, plant, sofa, cabinet, tv_monitor, stool", "living room"),
    "hallway": (
        "picture, cabinet, chair, table",
        "entryway/foyer/lobby, living room, familyroom/lounge, office, kitchen, spa/sauna, other room, utilityroom/toolroom",
    ),
    "junk": ("picture, chair, sink, cushion, counter, plant, bed, tv_monitor", "spa/sauna"),
    "kitchen": ("cabinet, chair, counter, sink, stool, picture, table", "utilityroom/toolroom"),
    "laundryroom/mudroom": ("cabinet, counter, picture, sink", "bathroom, kitchen, utilityroom/toolroom"),
    "living room": ("cushion, table, chair, picture, sofa, plant, stool, fireplace, cabinet", "familyroom/lounge"),
    "lounge": ("chair, picture, table, cushion, sofa", "living room, familyroom/lounge, rec/game"),
    "meetingroom/conferenceroom": (
        "chair, picture, table",
        "bedroom, hallway, dining room, entryway/foyer/lobby, living room, familyroom/lounge, office, kitchen, lounge, rec/game, spa/sauna, other room, utilityroom/toolroom",
    ),
    "office": ("chair, table, picture, tv_monitor, chest_of_drawers, cabinet, cushion", "familyroom/lounge"),
    "other room": ("seating, chair, table, picture, cushion, cabinet", "entryway/foyer/lobby, spa/sauna"),
    "porch/terrace/deck": ("chair, plant, table, cushion, sofa", "balcony, living room, familyroom/lounge, rec/game"),
    "rec/game": ("chair, table, cushion, picture, sofa, plant", "living room, familyroom/lounge"),
    "spa/sauna": ("table, chair, sink, seating, cabinet, shower, picture, bed, plant, towel, cushion", "bathroom, entryway/foyer/lobby"),
    "toilet": ("toilet, picture, towel", "bathroom"),
    "utilityroom/toolroom": ("cabinet, chair, picture, table, counter, cushion, sink", "kitchen, spa/sauna"),
    "workout/gym/exercise": (
        "gym_equipment, picture, chair",
        "bedroom, hallway, dining room, entryway/foyer/lobby, living room, familyroom/lounge, office, kitchen, lounge, rec/game, spa/sauna, other room, utilityroom/toolroom, junk, meetingroom/conferenceroom",
    ),
}


def split(cell: str) -> list[str]:
    return [c.strip() for c in cell.split(",") if c.strip()]
