#pragma once

#include <sketchd/partition.hpp>
#include <sketchd/plan.hpp>
#include <sketchd/relation.hpp>

#include <string>


namespace fixtures {

using namespace sketchd;

inline Schema sales_schema()
{
    return Schema("sales", {{"sid", Kind::i64}, {"brand", Kind::str}, {"productName", Kind::str},
                            {"price", Kind::i64}, {"numSold", Kind::i64}});
}

inline Tuple sale(std::int64_t sid, const char *brand, const char *name, std::int64_t price, std::int64_t sold)
{
    return {Value(sid), Value(std::string(brand)), Value(std::string(name)), Value(price), Value(sold)};
}

inline BagRelation sales()
{
    BagRelation r(sales_schema());
    r.add(sale(1, "Lenovo", "ThinkPad T14s Gen 2", 349, 1));
    r.add(sale(2, "Lenovo", "ThinkPad T14s Gen 2", 449, 2));
    r.add(sale(3, "Apple", "MacBook Air 13-inch", 1199, 1));
    r.add(sale(4, "Apple", "MacBook Pro 14-inch", 3875, 1));
    r.add(sale(5, "Dell", "Dell XPS 13 Laptop", 1345, 1));
    r.add(sale(6, "HP", "HP ProBook 450 G9", 999, 4));
    r.add(sale(7, "HP", "HP ProBook 550 G9", 899, 1));
    return r;
}

inline Tuple s8() { return sale(8, "HP", "HP ProBook 650 G10", 1299, 1); }

inline Database sales_db()
{
    Database db;
    db.add(sales());
    return db;
}

/** price ranges [1,600] [601,1000] [1001,1500] [1501,10000], fragment ids 0..3 */
inline PartitionCatalog price_catalog()
{
    PartitionCatalog c;
    c.add(RangePartition("sales", "price", {Value(1), Value(601), Value(1001), Value(1501), Value(10000)}));
    return c;
}

/** Brands whose revenue exceeds 5000. */
inline Plan q_top()
{
    Plan p = project(table("sales"), {{col("brand"), "brand"}, {col("price") * col("numSold"), "v"}});
    p = aggregate(p, {"brand"}, {{AggFn::sum, "v", "rev"}});
    return select(p, col("rev") > Expr(std::int64_t{5000}));
}

/** R(a,b), S(c,d) with a partitioned into [1,5] [6,10] (ids 0,1) and c into [1,6] [7,10] (ids 2,3). */
inline Database rules_db()
{
    Database db;
    BagRelation r(Schema("R", {{"a", Kind::i64}, {"b", Kind::i64}}));
    r.add({Value(1), Value(2)});
    r.add({Value(2), Value(8)});
    r.add({Value(6), Value(3)});
    BagRelation s(Schema("S", {{"c", Kind::i64}, {"d", Kind::i64}}));
    s.add({Value(4), Value(3)});
    s.add({Value(3), Value(3)});
    s.add({Value(7), Value(8)});
    db.add(std::move(r));
    db.add(std::move(s));
    return db;
}

inline PartitionCatalog rules_catalog()
{
    PartitionCatalog c;
    c.add(RangePartition("R", "a", {Value(1), Value(6), Value(11)}));
    c.add(RangePartition("S", "c", {Value(1), Value(7), Value(11)}));
    return c;
}

inline Plan rules_query()
{
    Plan p = join(select(table("R"), col("a") > Expr(std::int64_t{3})), table("S"), col("b") == col("d"));
    p = aggregate(p, {"a"}, {{AggFn::sum, "c", "sc"}});
    return select(p, col("sc") > Expr(std::int64_t{5}));
}

}
