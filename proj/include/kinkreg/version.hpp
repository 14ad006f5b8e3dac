#pragma once

#define KINKREG_VERSION "0.1.0"
