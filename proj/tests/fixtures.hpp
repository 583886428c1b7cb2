#pragma once

// Published header examples, with the stray trailing commas of the printed
// versions removed so they are strict JSON.

namespace bsp_test {

inline constexpr const char* listing1_json = R"({
  "binsparse": {
    "version":      "0.1",
    "format":       "COO",
    "shape":        [428440, 896308],
    "number_of_stored_values": 3782463,
    "data_types":  {
      "values":     "iso[bint8]",
      "indices_0":  "uint32",
      "indices_1":  "uint32"
    }
  },
  "comment":      "[omitted for brevity]"
})";

inline constexpr const char* listing2_custom = R"({
  "transpose": [1, 0],
  "level": {
    "level_desc": "sparse",
    "rank": 1,
    "level": {
      "level_desc": "sparse",
      "rank": 1,
      "level": {
        "level_desc": "element"
      }
    }
  }
})";

}  // namespace bsp_test
