/** Payload lines captured from a live server over the demo home. */

export const DEVICE_LINES = [
  "DEV|1|Sprinkler%201|actuator|on_off|ambient|off(none);on(none)|Garden",
  "DEV|2|Sprinkler%202|actuator|on_off|ambient|off(none);on(none)|Garden",
  "DEV|3|Washing%20machine|actuator_sensor|on_off|ambient|off(none);on(none)|Kitchen",
  "DEV|4|Front%20door|sensor|opened_closed|security||Entrance",
  "DEV|5|Temperature|sensor|leveled|security||Saloon",
  "DEV|6|Gas%20detector|sensor|on_off|vital||Kitchen",
  "ROB|1|Cleaning%20robot|1|Clean(location);GoTo(location)|",
  "ROB|2|Home%20robot|1|GoTo(location)|3:off;3:on",
  "ROB|3|Mover%20robot|1|GoTo(location);PickUp(object);PutInto(object)|",
];

export const MAP_LINES = [
  "WALL|2,40;40,40;0,0;70,0;70,40;0,40;0,0",
  "WALL|1,120;120,120;40,0;40,25",
  "WALL|1,120;120,120;40,25;70,25",
  "ICON|1|Sprinkler%201|6,36|sprinkler_off",
  "ICON|2|Sprinkler%202|16,36|sprinkler_off",
  "ICON|3|Washing%20machine|56,6|washer_off",
  "ICON|4|Front%20door|34,1|door_closed",
  "ICON|5|Temperature|24,20|thermometer_4",
  "ICON|6|Gas%20detector|64,3|gas_off",
  "ICON|0|Sofa|10,14|furniture_sofa",
  "ICON|0|Table|52,32|furniture_table",
  "STAT|1|sprinkler_off|Off",
  "STAT|2|sprinkler_off|Off",
  "STAT|3|washer_off|Off",
  "STAT|4|door_closed|Closed",
  "STAT|5|thermometer_4|25",
  "STAT|6|gas_off|Off",
];

export const SCENARIO_LINES = [
  "SCN|Clean%20Home|1|Scenario%20name%3A%20Clean%20Home%0AA.%20Cleaning%20robot%3A%20Clean%20%28Bathtub%29%20%40%20Now%0AB.%20%5BGather%20Dishes%5D%20%40%2010%3A00%0AC.%20Home%20robot%E2%86%92Washing%20machine%3A%20on%20%40%2010%3A05%0AD.%20Cleaning%20robot%3A%20Clean%20%28Saloon%29%20%40%2010%3A05%0A",
  "SCN|Gather%20Dishes|1|Scenario%20name%3A%20Gather%20Dishes%0AA.%20Mover%20robot%3A%20GoTo%20%28Saloon%29%20%40%20Now%0AB.%20Mover%20robot%3A%20PickUp%20%28Dishes%29%20%40%20In%202%20Minutes%0AC.%20Mover%20robot%3A%20GoTo%20%28Kitchen%29%20%40%20In%205%20Minutes%0AD.%20Mover%20robot%3A%20PutInto%20%28WashingMachine%29%20%40%20In%206%20Minutes%0AE.%20Mover%20robot%3A%20GoTo%20%28DefaultPosition%29%20%40%20In%207%20Minutes%0A",
  "SCN|Watering%20Plants|1|Scenario%20name%3A%20Watering%20Plants%0AA.%20Sprinkler%201%3A%20on%20%40%205%3A00%0AB.%20Sprinkler%202%3A%20on%20%40%205%3A30%0AC.%20Sprinkler%201%3A%20off%20%40%207%3A00%0AD.%20Sprinkler%202%3A%20off%20%40%209%3A00%0A",
];

export const ROBOT_LINES = [
  ...DEVICE_LINES.slice(6),
  "RSTAT|1|Dock|Idle|0",
  "RSTAT|2|Dock|Idle|0",
  "RSTAT|3|Kitchen|Idle|0",
];

export const RULE_LINES = [
  "RULE|temp%20guard|1|when%20Temperature%20%3E%2030%20then%20Sprinkler%201%3A%20on%20%40%20Now",
];
