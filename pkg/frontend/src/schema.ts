// GENERATED by scripts/sync-schema.mjs -- do not edit.
// Source of truth: src/cavsim/data/messages.json in the simulation package.

export type FieldSpec = ReadonlyArray<readonly [string, string]>;

export interface WireSchema {
  readonly version: number;
  readonly comment: string;
  readonly channels: Readonly<Record<string, readonly string[]>>;
  readonly types: Readonly<Record<string, FieldSpec>>;
  readonly subtypes: Readonly<Record<string, FieldSpec>>;
}

export const WIRE_SCHEMA: WireSchema = {
  "version": 1,
  "comment": "Single source of truth for wire message shapes. Field order here IS the canonical byte order. The Python codec and the TypeScript console codec are both checked against this file.",
  "channels": {
    "command": [
      "init",
      "waypoint"
    ],
    "stream": [
      "session",
      "tick",
      "reset",
      "transform",
      "actuators",
      "tick_done"
    ],
    "gateway": [
      "scene",
      "state",
      "error",
      "start",
      "pause",
      "reset",
      "replay",
      "manual_drive",
      "release_manual"
    ]
  },
  "types": {
    "init": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "algorithm",
        "str"
      ],
      [
        "controller_params",
        "num_map"
      ],
      [
        "initial_state",
        "float4"
      ],
      [
        "appearance",
        "str"
      ]
    ],
    "waypoint": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "t_stamp",
        "float"
      ],
      [
        "x",
        "float"
      ],
      [
        "y",
        "float"
      ],
      [
        "yaw",
        "float"
      ],
      [
        "speed",
        "float"
      ]
    ],
    "transform": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "t_stamp",
        "float"
      ],
      [
        "position",
        "float3"
      ],
      [
        "rotation",
        "float4"
      ]
    ],
    "actuators": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "t_stamp",
        "float"
      ],
      [
        "v",
        "float"
      ],
      [
        "u_d",
        "float"
      ],
      [
        "steer",
        "float"
      ],
      [
        "gas",
        "float"
      ],
      [
        "brake",
        "float"
      ],
      [
        "handbrake",
        "int"
      ]
    ],
    "session": [
      [
        "scale",
        "float"
      ],
      [
        "physics_dt",
        "float"
      ],
      [
        "substeps",
        "int"
      ],
      [
        "paths",
        "path_list"
      ],
      [
        "prefabs",
        "prefab_map"
      ]
    ],
    "tick": [
      [
        "t",
        "float"
      ],
      [
        "expected",
        "id_stamp_list"
      ]
    ],
    "tick_done": [
      [
        "t",
        "float"
      ]
    ],
    "reset": [],
    "scene": [
      [
        "paths",
        "poly_list"
      ],
      [
        "vehicles",
        "scene_vehicle_list"
      ]
    ],
    "state": [
      [
        "clock",
        "float"
      ],
      [
        "state",
        "str"
      ],
      [
        "vehicles",
        "row_list"
      ]
    ],
    "error": [
      [
        "message",
        "str"
      ]
    ],
    "start": [],
    "pause": [],
    "replay": [],
    "manual_drive": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "steer",
        "float"
      ],
      [
        "throttle",
        "float"
      ]
    ],
    "release_manual": [
      [
        "vehicle_id",
        "int"
      ]
    ]
  },
  "subtypes": {
    "segment_line": [
      [
        "kind",
        "str"
      ],
      [
        "x0",
        "float"
      ],
      [
        "y0",
        "float"
      ],
      [
        "x1",
        "float"
      ],
      [
        "y1",
        "float"
      ]
    ],
    "segment_arc": [
      [
        "kind",
        "str"
      ],
      [
        "cx",
        "float"
      ],
      [
        "cy",
        "float"
      ],
      [
        "radius",
        "float"
      ],
      [
        "start_angle",
        "float"
      ],
      [
        "sweep",
        "float"
      ]
    ],
    "path": [
      [
        "path_id",
        "str"
      ],
      [
        "segments",
        "segment_list"
      ]
    ],
    "poly": [
      [
        "path_id",
        "str"
      ],
      [
        "points",
        "point_list"
      ]
    ],
    "scene_vehicle": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "appearance",
        "str"
      ],
      [
        "length",
        "float"
      ]
    ],
    "row": [
      [
        "vehicle_id",
        "int"
      ],
      [
        "status",
        "str"
      ],
      [
        "p",
        "float"
      ],
      [
        "x",
        "float"
      ],
      [
        "y",
        "float"
      ],
      [
        "yaw",
        "float"
      ],
      [
        "v",
        "float"
      ],
      [
        "u_d",
        "float"
      ],
      [
        "steer",
        "float"
      ],
      [
        "gas",
        "float"
      ],
      [
        "brake",
        "float"
      ],
      [
        "handbrake",
        "int"
      ]
    ]
  }
};
