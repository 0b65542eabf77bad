#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/bloom.hpp>
#include <sketchd/codec.hpp>
#include <sketchd/csv.hpp>
#include <sketchd/engine/engine.hpp>
#include <sketchd/engine/snapshot.hpp>
#include <sketchd/error.hpp>
#include <sketchd/eval.hpp>
#include <sketchd/eval_annotated.hpp>
#include <sketchd/manager.hpp>
#include <sketchd/partition.hpp>
#include <sketchd/plan.hpp>
#include <sketchd/pushdown.hpp>
#include <sketchd/relation.hpp>
#include <sketchd/sketch.hpp>
#include <sketchd/store.hpp>
#include <sketchd/value.hpp>
#include <sketchd/workload/generator.hpp>
#include <sketchd/workload/report.hpp>
#include <sketchd/workload/workload.hpp>
